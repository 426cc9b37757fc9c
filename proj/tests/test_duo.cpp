#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <vector>

#include "hbac/clustering.hpp"
#include "hbac/duo.hpp"
#include "hbac/stats.hpp"

using namespace hbac;
using namespace hbac::duo;

namespace {

// A complete demo R2 grid: higher for younger students living closer.
std::vector<std::vector<double>> demo_r2() {
    return {
        {70, 65, 55, 40, 30, 20, 10, 5},
        {60, 55, 45, 35, 25, 15, 8, 3},
        {50, 45, 38, 28, 20, 12, 6, 2},
        {40, 35, 28, 20, 15, 9, 4, 1},
        {30, 25, 20, 15, 10, 6, 3, 0},
    };
}

}  // namespace

TEST_CASE("R1 factors are exactly the tabulated four") {
    const auto r1 = builtin_r1();
    CHECK(r1[static_cast<std::size_t>(Education::mbo12)] == 1.2);
    CHECK(r1[static_cast<std::size_t>(Education::mbo34)] == 1.1);
    CHECK(r1[static_cast<std::size_t>(Education::hbo)] == 1.0);
    CHECK(r1[static_cast<std::size_t>(Education::wo)] == 0.8);
}

TEST_CASE("R3 holds exactly the 18 tabulated rows") {
    const auto r3 = builtin_r3();
    REQUIRE(r3.size() == 18);
    const RiskTables tables = make_risk_tables(demo_r2());

    struct Expect {
        AgeBand current;
        R3Age registered;
        R3Age gba;
        double value;
    };
    const std::vector<Expect> expected{
        {AgeBand::a21_22, R3Age::a17_18, R3Age::a17_18, 5},
        {AgeBand::a21_22, R3Age::a17_18, R3Age::a19_20, 0},
        {AgeBand::a21_22, R3Age::a19_20, R3Age::a19_20, 0},
        {AgeBand::a23_24, R3Age::a17_18, R3Age::a17_18, 15},
        {AgeBand::a23_24, R3Age::a17_18, R3Age::a19_20, 10},
        {AgeBand::a23_24, R3Age::a17_18, R3Age::a21_22, 0},
        {AgeBand::a25_50, R3Age::a17_18, R3Age::a17_18, 30},
        {AgeBand::a25_50, R3Age::a17_18, R3Age::a19_20, 25},
        {AgeBand::a25_50, R3Age::a17_18, R3Age::a21_22, 15},
        {AgeBand::a25_50, R3Age::a17_18, R3Age::a23_24, 0},
        {AgeBand::a25_50, R3Age::a17_18, R3Age::a25_65, 0},
        {AgeBand::a25_50, R3Age::a19_20, R3Age::a19_20, 25},
        {AgeBand::a25_50, R3Age::a19_20, R3Age::a21_22, 0},
        {AgeBand::a25_50, R3Age::a19_20, R3Age::a23_24, 0},
        {AgeBand::a25_50, R3Age::a19_20, R3Age::a25_65, 0},
        {AgeBand::a25_50, R3Age::a21_22, R3Age::a21_22, 15},
        {AgeBand::a25_50, R3Age::a21_22, R3Age::a23_24, 0},
        {AgeBand::a25_50, R3Age::a23_24, R3Age::a23_24, 0},
    };
    REQUIRE(expected.size() == 18);
    for (const auto& e : expected) {
        CHECK(tables.r3_factor(e.current, e.registered, e.gba) == e.value);
    }
    // Unlisted triples default to 0.
    CHECK(tables.r3_factor(AgeBand::a15_18, R3Age::a17_18, R3Age::a17_18) == 0);
    CHECK(tables.r3_factor(AgeBand::a19_20, R3Age::a19_20, R3Age::a19_20) == 0);
    CHECK(tables.r3_factor(AgeBand::a21_22, R3Age::a21_22, R3Age::a21_22) == 0);
    CHECK(tables.r3_factor(AgeBand::a25_50, R3Age::a25_65, R3Age::a25_65) == 0);
}

TEST_CASE("categorize matches the quoted bin edges on every integer score") {
    for (int s = 0; s <= 180; ++s) {
        int expect;
        if (s == 0) expect = 6;
        else if (s <= 19) expect = 5;
        else if (s <= 39) expect = 4;
        else if (s <= 59) expect = 3;
        else if (s <= 79) expect = 2;
        else expect = 1;
        CHECK(categorize(s) == expect);
    }
    CHECK(categorize(0) == 6);
    CHECK(categorize(79) == 2);
    CHECK(categorize(80) == 1);
    CHECK(categorize(180) == 1);
    CHECK_THROWS_AS(categorize(-0.5), Error);
    CHECK_THROWS_AS(categorize(180.5), Error);
}

TEST_CASE("fractional scores fall into the covering bin") {
    CHECK(categorize(0.8) == 5);    // nonzero but below 20
    CHECK(categorize(19.8) == 5);
    CHECK(categorize(20.0) == 4);
    CHECK(categorize(79.2) == 2);
}

TEST_CASE("risk_score worked examples") {
    RiskTables tables = make_risk_tables(demo_r2());

    // WO student, R2 entry forced to 100, unlisted R3 triple.
    tables.r2[static_cast<std::size_t>(AgeBand::a19_20)]
             [static_cast<std::size_t>(Distance::d0km)] = 100.0;
    StudentRecord wo;
    wo.education = Education::wo;
    wo.age_current = AgeBand::a19_20;
    wo.distance = Distance::d0km;
    wo.age_registered = R3Age::a19_20;
    wo.age_gba = R3Age::a19_20;
    const RiskOutcome high = risk_score(wo, tables);
    CHECK(high.score == doctest::Approx(80.0));
    CHECK(high.category == 1);
    CHECK(high.high_risk);

    // Zero R2 and R3 gives score 0, category 6, not high risk.
    tables.r2[static_cast<std::size_t>(AgeBand::a19_20)]
             [static_cast<std::size_t>(Distance::d50_500km)] = 0.0;
    StudentRecord zero = wo;
    zero.distance = Distance::d50_500km;
    const RiskOutcome none = risk_score(zero, tables);
    CHECK(none.score == 0.0);
    CHECK(none.category == 6);
    CHECK_FALSE(none.high_risk);

    // MBO 1-2 with R2=10 and the listed R3 triple worth 25: 1.2*(10+25)=42.
    tables.r2[static_cast<std::size_t>(AgeBand::a25_50)]
             [static_cast<std::size_t>(Distance::d2_5km)] = 10.0;
    StudentRecord mbo;
    mbo.education = Education::mbo12;
    mbo.age_current = AgeBand::a25_50;
    mbo.distance = Distance::d2_5km;
    mbo.age_registered = R3Age::a17_18;
    mbo.age_gba = R3Age::a19_20;
    const RiskOutcome mid = risk_score(mbo, tables);
    CHECK(mid.score == doctest::Approx(42.0));
    CHECK(mid.category == 3);
    CHECK_FALSE(mid.high_risk);
}

TEST_CASE("risk_score error paths") {
    RiskTables tables = make_risk_tables(demo_r2());
    StudentRecord rec;
    rec.distance = Distance::unknown;
    CHECK_THROWS_AS(risk_score(rec, tables), Error);
    try {
        risk_score(rec, tables);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_distance);
    }

    tables.r2[0][0] = std::numeric_limits<double>::quiet_NaN();
    StudentRecord young;
    young.age_current = AgeBand::a15_18;
    young.distance = Distance::d0km;
    CHECK_THROWS_AS(risk_score(young, tables), Error);
    try {
        risk_score(young, tables);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::missing_table_entry);
    }
}

TEST_CASE("risk_score is monotone in R2+R3 and respects the R1 ordering") {
    const RiskTables tables = make_risk_tables(demo_r2());
    // For a fixed education the score grows with the R2 entry.
    StudentRecord rec;
    rec.education = Education::hbo;
    rec.age_registered = R3Age::a19_20;
    rec.age_gba = R3Age::a19_20;
    double last = -1.0;
    for (auto dist : {Distance::d50_500km, Distance::d20_50km,
                      Distance::d10_20km, Distance::d5_10km, Distance::d2_5km,
                      Distance::d1_2km, Distance::d1m_1km, Distance::d0km}) {
        rec.age_current = AgeBand::a19_20;
        rec.distance = dist;
        const double s = risk_score(rec, tables).score;
        CHECK(s >= last);
        last = s;
    }

    // MBO12 > MBO34 > HBO > WO for identical (R2 + R3).
    StudentRecord base;
    base.age_current = AgeBand::a19_20;
    base.distance = Distance::d1m_1km;
    base.age_registered = R3Age::a19_20;
    base.age_gba = R3Age::a19_20;
    std::vector<double> scores;
    for (auto edu : {Education::mbo12, Education::mbo34, Education::hbo,
                     Education::wo}) {
        base.education = edu;
        scores.push_back(risk_score(base, tables).score);
    }
    CHECK(scores[0] > scores[1]);
    CHECK(scores[1] > scores[2]);
    CHECK(scores[2] > scores[3]);
}

TEST_CASE("load_risk_tables reads the R2 grid from CSV") {
    const RiskTables tables =
        load_risk_tables(std::string(HBAC_SOURCE_DIR) + "/data/duo_r2_demo.csv");
    CHECK(tables.r2_factor(AgeBand::a15_18, Distance::d0km) == 70.0);
    CHECK(tables.r2_factor(AgeBand::a25_50, Distance::d50_500km) == 0.0);
    CHECK(tables.r2_factor(AgeBand::a21_22, Distance::d1_2km) == 38.0);
    CHECK(tables.r1_factor(Education::wo) == 0.8);
    CHECK(tables.r3.size() == 18);
    CHECK_THROWS_AS(load_risk_tables("/nonexistent/r2.csv"), Error);
}

TEST_CASE("R1 and R3 can be overridden by table files") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "hbac_duo_override";
    fs::create_directories(dir);
    const std::string r1_path = (dir / "r1.csv").string();
    const std::string r3_path = (dir / "r3.csv").string();
    {
        std::ofstream r1(r1_path);
        r1 << "education,factor\nMBO12,2.0\nMBO34,2.0\nHBO,2.0\nWO,2.0\n";
        std::ofstream r3(r3_path);
        r3 << "current_lo,current_hi,registered_lo,registered_hi,gba_lo,"
              "gba_hi,factor\n21,22,17,18,17,18,40\n";
    }
    const std::string r2_path =
        std::string(HBAC_SOURCE_DIR) + "/data/duo_r2_demo.csv";
    const RiskTables tables = load_risk_tables(r2_path, r1_path, r3_path);
    CHECK(tables.r1_factor(Education::wo) == 2.0);
    CHECK(tables.r3.size() == 1);
    CHECK(tables.r3_factor(AgeBand::a21_22, R3Age::a17_18, R3Age::a17_18) ==
          40.0);
    CHECK(tables.r3_factor(AgeBand::a25_50, R3Age::a17_18, R3Age::a17_18) ==
          0.0);

    // Incomplete R1 overrides are rejected.
    {
        std::ofstream r1(r1_path);
        r1 << "education,factor\nWO,2.0\n";
    }
    CHECK_THROWS_AS(load_risk_tables(r2_path, r1_path, ""), Error);
    fs::remove_all(dir);
}

TEST_CASE("synth_cohort: point-mass mix yields identical rows") {
    const RiskTables tables = make_risk_tables(demo_r2());
    CohortStratum stratum;
    stratum.weight = 1.0;
    stratum.record.education = Education::mbo12;
    stratum.record.age_current = AgeBand::a15_18;
    stratum.record.distance = Distance::d1m_1km;
    const Dataset d = synth_cohort(50, {stratum}, tables, 4);
    CHECK(d.n_rows() == 50);
    CHECK(d.n_cols() == 17);
    CHECK(d.schema().metric_kind == MetricKind::binary);
    for (std::size_t r = 1; r < d.n_rows(); ++r) {
        for (std::size_t c = 0; c < d.n_cols(); ++c) {
            CHECK(d.cell(r, c) == d.cell(0, c));
        }
        CHECK(d.metric()[r] == d.metric()[0]);
    }
    // MBO12 young nearby: R2=65, score 1.2*65=78, category 2, high risk.
    CHECK(d.metric()[0] == 1.0);
}

TEST_CASE("synth_cohort one-hot groups are exactly-one-hot") {
    const RiskTables tables = make_risk_tables(demo_r2());
    std::vector<CohortStratum> mix;
    CohortStratum a;
    a.weight = 0.5;
    a.record.education = Education::wo;
    a.record.age_current = AgeBand::a19_20;
    a.record.distance = Distance::d50_500km;
    CohortStratum b;
    b.weight = 0.5;
    b.record.education = Education::mbo12;
    b.record.age_current = AgeBand::a15_18;
    b.record.distance = Distance::d1m_1km;
    mix = {a, b};
    const Dataset d = synth_cohort(200, mix, tables, 9);
    REQUIRE(d.n_cols() == 17);
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        double edu = 0, age = 0, dist = 0;
        for (std::size_t c = 0; c < 4; ++c) edu += d.cell(r, c);
        for (std::size_t c = 4; c < 9; ++c) age += d.cell(r, c);
        for (std::size_t c = 9; c < 17; ++c) dist += d.cell(r, c);
        CHECK(edu == 1.0);
        CHECK(age == 1.0);
        CHECK(dist == 1.0);
    }
    CHECK(validate(d).ok());
}

TEST_CASE("synth_cohort validates its inputs") {
    const RiskTables tables = make_risk_tables(demo_r2());
    CohortStratum s;
    s.weight = 0.6;  // does not sum to 1
    CHECK_THROWS_AS(synth_cohort(10, {s}, tables, 1), Error);
    CohortStratum unknown;
    unknown.weight = 1.0;
    unknown.record.distance = Distance::unknown;
    CHECK_THROWS_AS(synth_cohort(10, {unknown}, tables, 1), Error);
    CohortStratum fine;
    fine.weight = 1.0;
    CHECK_THROWS_AS(synth_cohort(0, {fine}, tables, 1), Error);
}

TEST_CASE("synth_cohort is deterministic") {
    const RiskTables tables = make_risk_tables(demo_r2());
    CohortStratum a;
    a.weight = 0.3;
    a.record.education = Education::wo;
    a.record.distance = Distance::d20_50km;
    CohortStratum b;
    b.weight = 0.7;
    b.record.education = Education::hbo;
    b.record.distance = Distance::d5_10km;
    const Dataset d1 = synth_cohort(100, {a, b}, tables, 12);
    const Dataset d2 = synth_cohort(100, {a, b}, tables, 12);
    CHECK(d1.cells() == d2.cells());
    CHECK(d1.metric() == d2.metric());
}

TEST_CASE("cohort with a high-risk mass is isolated by the pipeline") {
    const RiskTables tables = make_risk_tables(demo_r2());
    std::vector<CohortStratum> mix;
    CohortStratum wo;
    wo.weight = 0.45;
    wo.record.education = Education::wo;
    wo.record.age_current = AgeBand::a19_20;
    wo.record.distance = Distance::d50_500km;
    CohortStratum hbo;
    hbo.weight = 0.35;
    hbo.record.education = Education::hbo;
    hbo.record.age_current = AgeBand::a21_22;
    hbo.record.distance = Distance::d10_20km;
    CohortStratum mbo;
    mbo.weight = 0.20;
    mbo.record.education = Education::mbo12;
    mbo.record.age_current = AgeBand::a15_18;
    mbo.record.distance = Distance::d1m_1km;
    mix = {wo, hbo, mbo};

    const Dataset cohort = synth_cohort(1500, mix, tables, 21);
    const SplitIndices split = split_sample(cohort.n_rows(), 0.2, 5);
    const Dataset train = cohort.subset(split.train);
    const Dataset test = cohort.subset(split.test);

    HbacConfig cfg;
    cfg.n_min = 50;
    cfg.max_iterations = 100;
    cfg.splitter = Splitter::kmodes;
    cfg.seed = 33;
    const Partition p = fit_hbac(train, cfg);
    REQUIRE(p.size() >= 2);

    const TestReport report = test_clusters(p, test, 0.05);
    // The top-bias cluster holds the MBO mass and its difference is
    // overwhelmingly significant.
    double best_mean = -1.0;
    const ClusterTest* top = nullptr;
    for (const ClusterTest& t : report.tests) {
        if (t.mean_in && *t.mean_in > best_mean) {
            best_mean = *t.mean_in;
            top = &t;
        }
    }
    REQUIRE(top != nullptr);
    CHECK(best_mean > 0.9);
    REQUIRE(top->testable);
    CHECK(*top->p_adjusted < 1e-6);
}

TEST_CASE("full-scale cohort run completes") {
    const RiskTables tables = make_risk_tables(demo_r2());
    std::vector<CohortStratum> mix;
    CohortStratum wo;
    wo.weight = 0.4;
    wo.record.education = Education::wo;
    wo.record.age_current = AgeBand::a19_20;
    wo.record.distance = Distance::d50_500km;
    CohortStratum hbo;
    hbo.weight = 0.4;
    hbo.record.education = Education::hbo;
    hbo.record.age_current = AgeBand::a21_22;
    hbo.record.distance = Distance::d10_20km;
    CohortStratum mbo;
    mbo.weight = 0.2;
    mbo.record.education = Education::mbo34;
    mbo.record.age_current = AgeBand::a25_50;
    mbo.record.distance = Distance::d0km;
    mbo.record.age_registered = R3Age::a17_18;
    mbo.record.age_gba = R3Age::a19_20;
    mix = {wo, hbo, mbo};

    // Population-scale smoke test: only feasibility is asserted.
    const std::size_t n = 214599;
    const Dataset cohort = synth_cohort(n, mix, tables, 14);
    CHECK(cohort.n_rows() == n);
    HbacConfig cfg;
    cfg.n_min = 5000;
    cfg.max_iterations = 1000;
    cfg.splitter = Splitter::kmodes;
    cfg.seed = 3;
    const Partition p = fit_hbac(cohort, cfg);
    CHECK(p.size() >= 2);
    CHECK(p.size() <= n / cfg.n_min);
}
