#include "hbac/duo.hpp"

#include <cmath>
#include <limits>

#include "hbac/io.hpp"

namespace hbac::duo {

const char* to_string(Education v) {
    switch (v) {
        case Education::mbo12: return "MBO12";
        case Education::mbo34: return "MBO34";
        case Education::hbo: return "HBO";
        case Education::wo: return "WO";
    }
    return "?";
}

const char* to_string(AgeBand v) {
    switch (v) {
        case AgeBand::a15_18: return "15-18";
        case AgeBand::a19_20: return "19-20";
        case AgeBand::a21_22: return "21-22";
        case AgeBand::a23_24: return "23-24";
        case AgeBand::a25_50: return "25-50";
    }
    return "?";
}

const char* to_string(R3Age v) {
    switch (v) {
        case R3Age::a17_18: return "17-18";
        case R3Age::a19_20: return "19-20";
        case R3Age::a21_22: return "21-22";
        case R3Age::a23_24: return "23-24";
        case R3Age::a25_65: return "25-65";
    }
    return "?";
}

const char* to_string(Distance v) {
    switch (v) {
        case Distance::d0km: return "0km";
        case Distance::d1m_1km: return "1m-1km";
        case Distance::d1_2km: return "1-2km";
        case Distance::d2_5km: return "2-5km";
        case Distance::d5_10km: return "5-10km";
        case Distance::d10_20km: return "10-20km";
        case Distance::d20_50km: return "20-50km";
        case Distance::d50_500km: return "50-500km";
        case Distance::unknown: return "unknown";
    }
    return "?";
}

namespace {

template <typename T>
T enum_from(const std::string& s, std::size_t count, const char* what) {
    for (std::size_t i = 0; i < count; ++i) {
        if (s == to_string(static_cast<T>(i))) return static_cast<T>(i);
    }
    raise(Errc::bad_config, std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace

Education education_from(const std::string& s) {
    return enum_from<Education>(s, kEducationCount, "education");
}
AgeBand age_band_from(const std::string& s) {
    return enum_from<AgeBand>(s, kAgeBandCount, "age band");
}
R3Age r3_age_from(const std::string& s) {
    return enum_from<R3Age>(s, 5, "age band");
}
Distance distance_from(const std::string& s) {
    return enum_from<Distance>(s, kKnownDistanceCount + 1, "distance band");
}

std::array<double, kEducationCount> builtin_r1() {
    return {1.2, 1.1, 1.0, 0.8};  // MBO12, MBO34, HBO, WO
}

std::vector<R3Row> builtin_r3() {
    // The 18 tabulated deviation combinations; every other triple is 0.
    return {
        {21, 22, 17, 18, 17, 18, 5},
        {21, 22, 17, 18, 19, 20, 0},
        {21, 22, 19, 20, 19, 20, 0},
        {23, 24, 17, 18, 17, 18, 15},
        {23, 24, 17, 18, 19, 20, 10},
        {23, 24, 17, 18, 21, 22, 0},
        {25, 65, 17, 18, 17, 18, 30},
        {25, 65, 17, 18, 19, 20, 25},
        {25, 65, 17, 18, 21, 22, 15},
        {25, 65, 17, 18, 23, 24, 0},
        {25, 65, 17, 18, 25, 65, 0},
        {25, 65, 19, 20, 19, 20, 25},
        {25, 65, 19, 20, 21, 22, 0},
        {25, 65, 19, 20, 23, 24, 0},
        {25, 65, 19, 20, 25, 65, 0},
        {25, 65, 21, 22, 21, 22, 15},
        {25, 65, 21, 22, 23, 24, 0},
        {25, 65, 23, 24, 23, 24, 0},
    };
}

namespace {

struct AgeRange {
    int lo, hi;
};

// Current-age bands map onto the R3 table's coarser ranges; the two
// youngest bands never match a row and therefore always contribute 0.
AgeRange r3_current_range(AgeBand band) {
    switch (band) {
        case AgeBand::a21_22: return {21, 22};
        case AgeBand::a23_24: return {23, 24};
        case AgeBand::a25_50: return {25, 65};
        default: return {0, 0};
    }
}

AgeRange r3_range(R3Age age) {
    switch (age) {
        case R3Age::a17_18: return {17, 18};
        case R3Age::a19_20: return {19, 20};
        case R3Age::a21_22: return {21, 22};
        case R3Age::a23_24: return {23, 24};
        case R3Age::a25_65: return {25, 65};
    }
    return {0, 0};
}

}  // namespace

double RiskTables::r2_factor(AgeBand age, Distance distance) const {
    if (distance == Distance::unknown) {
        raise(Errc::unknown_distance,
              "records with unknown distance carry no risk score");
    }
    const auto a = static_cast<std::size_t>(age);
    const auto d = static_cast<std::size_t>(distance);
    if (a >= r2.size() || d >= r2[a].size() || std::isnan(r2[a][d])) {
        raise(Errc::missing_table_entry,
              std::string("R2 table has no entry for age ") + to_string(age) +
                  ", distance " + to_string(distance));
    }
    return r2[a][d];
}

double RiskTables::r3_factor(AgeBand current, R3Age registered,
                             R3Age gba) const {
    const AgeRange c = r3_current_range(current);
    const AgeRange r = r3_range(registered);
    const AgeRange g = r3_range(gba);
    for (const R3Row& row : r3) {
        if (row.current_lo == c.lo && row.current_hi == c.hi &&
            row.registered_lo == r.lo && row.registered_hi == r.hi &&
            row.gba_lo == g.lo && row.gba_hi == g.hi) {
            return row.factor;
        }
    }
    return 0.0;
}

RiskTables make_risk_tables(std::vector<std::vector<double>> r2) {
    RiskTables tables;
    tables.r1 = builtin_r1();
    tables.r2 = std::move(r2);
    tables.r3 = builtin_r3();
    return tables;
}

namespace {

double parse_cell(const std::string& field) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end == field.c_str() || *end != '\0') {
        raise(Errc::bad_config, "bad numeric cell '" + field + "'");
    }
    return v;
}

std::array<double, kEducationCount> load_r1_csv(const std::string& path) {
    const io::Csv csv = io::parse_csv(io::read_file(path));
    std::array<double, kEducationCount> r1{};
    std::array<bool, kEducationCount> seen{};
    for (const auto& row : csv.rows) {
        if (row.size() != 2) raise(Errc::bad_config, "R1 rows are education,factor");
        const auto e = static_cast<std::size_t>(education_from(row[0]));
        r1[e] = parse_cell(row[1]);
        seen[e] = true;
    }
    for (bool s : seen) {
        if (!s) raise(Errc::bad_config, "R1 override must cover all education types");
    }
    return r1;
}

std::vector<R3Row> load_r3_csv(const std::string& path) {
    const io::Csv csv = io::parse_csv(io::read_file(path));
    std::vector<R3Row> rows;
    for (const auto& row : csv.rows) {
        if (row.size() != 7) {
            raise(Errc::bad_config, "R3 rows are six range bounds plus a factor");
        }
        R3Row r{};
        r.current_lo = static_cast<int>(parse_cell(row[0]));
        r.current_hi = static_cast<int>(parse_cell(row[1]));
        r.registered_lo = static_cast<int>(parse_cell(row[2]));
        r.registered_hi = static_cast<int>(parse_cell(row[3]));
        r.gba_lo = static_cast<int>(parse_cell(row[4]));
        r.gba_hi = static_cast<int>(parse_cell(row[5]));
        r.factor = parse_cell(row[6]);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

RiskTables load_risk_tables(const std::string& r2_csv_path,
                            const std::string& r1_csv_path,
                            const std::string& r3_csv_path) {
    const io::Csv csv = io::parse_csv(io::read_file(r2_csv_path));
    if (csv.header.size() < 2) {
        raise(Errc::bad_config, "R2 table needs an age column plus distance columns");
    }
    std::vector<Distance> header_bands;
    for (std::size_t c = 1; c < csv.header.size(); ++c) {
        const Distance d = distance_from(csv.header[c]);
        if (d == Distance::unknown) {
            raise(Errc::bad_config, "R2 table cannot carry an 'unknown' column");
        }
        header_bands.push_back(d);
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> r2(
        kAgeBandCount, std::vector<double>(kKnownDistanceCount, nan));
    for (const auto& row : csv.rows) {
        const AgeBand age = age_band_from(row[0]);
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (row[c].empty()) continue;  // stays missing
            char* end = nullptr;
            const double v = std::strtod(row[c].c_str(), &end);
            if (end == row[c].c_str() || *end != '\0' || v < 0.0) {
                raise(Errc::bad_config, "bad R2 cell '" + row[c] + "'");
            }
            r2[static_cast<std::size_t>(age)]
              [static_cast<std::size_t>(header_bands[c - 1])] = v;
        }
    }
    RiskTables tables = make_risk_tables(std::move(r2));
    if (!r1_csv_path.empty()) tables.r1 = load_r1_csv(r1_csv_path);
    if (!r3_csv_path.empty()) tables.r3 = load_r3_csv(r3_csv_path);
    return tables;
}

int categorize(double score) {
    if (!(score >= 0.0 && score <= 180.0)) {
        raise(Errc::out_of_range, "risk score must lie in [0, 180]");
    }
    if (score == 0.0) return 6;
    if (score < 20.0) return 5;
    if (score < 40.0) return 4;
    if (score < 60.0) return 3;
    if (score < 80.0) return 2;
    return 1;
}

RiskOutcome risk_score(const StudentRecord& record, const RiskTables& tables) {
    const double r2 = tables.r2_factor(record.age_current, record.distance);
    const double r3 = tables.r3_factor(record.age_current,
                                       record.age_registered, record.age_gba);
    RiskOutcome out;
    out.score = tables.r1_factor(record.education) * (r2 + r3);
    if (out.score > 180.0) {
        out.score = 180.0;
        out.clamped = true;
    }
    out.category = categorize(out.score);
    out.high_risk = out.category <= 2;
    return out;
}

Dataset synth_cohort(std::size_t n, const std::vector<CohortStratum>& mix,
                     const RiskTables& tables, std::uint64_t seed) {
    if (n == 0) raise(Errc::bad_config, "cohort size must be >= 1");
    if (mix.empty()) raise(Errc::bad_config, "cohort mix is empty");
    double total = 0.0;
    for (const CohortStratum& s : mix) {
        if (s.weight < 0.0) raise(Errc::bad_config, "negative stratum weight");
        if (s.record.distance == Distance::unknown) {
            raise(Errc::bad_config,
                  "cohort strata cannot use the 'unknown' distance band");
        }
        total += s.weight;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
        raise(Errc::bad_config, "stratum weights must sum to 1");
    }

    FeatureSchema schema;
    schema.metric_kind = MetricKind::binary;
    Column education{"education", ColumnKind::categorical, {}};
    for (std::size_t i = 0; i < kEducationCount; ++i) {
        education.categories.push_back(to_string(static_cast<Education>(i)));
    }
    Column age{"age", ColumnKind::categorical, {}};
    for (std::size_t i = 0; i < kAgeBandCount; ++i) {
        age.categories.push_back(to_string(static_cast<AgeBand>(i)));
    }
    Column distance{"distance", ColumnKind::categorical, {}};
    for (std::size_t i = 0; i < kKnownDistanceCount; ++i) {
        distance.categories.push_back(to_string(static_cast<Distance>(i)));
    }
    schema.columns = {education, age, distance};

    RngStream rng(seed, derive_stream(0xd105ULL));
    std::vector<double> cells;
    cells.reserve(n * 3);
    std::vector<double> metric;
    metric.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.next_double();
        double acc = 0.0;
        const CohortStratum* chosen = &mix.back();
        for (const CohortStratum& s : mix) {
            acc += s.weight;
            if (u < acc) {
                chosen = &s;
                break;
            }
        }
        const StudentRecord& rec = chosen->record;
        cells.push_back(static_cast<double>(rec.education));
        cells.push_back(static_cast<double>(rec.age_current));
        cells.push_back(static_cast<double>(rec.distance));
        metric.push_back(risk_score(rec, tables).high_risk ? 1.0 : 0.0);
    }

    const Dataset categorical(std::move(schema), std::move(cells),
                              std::move(metric));
    return one_hot_expand(categorical);
}

}  // namespace hbac::duo
