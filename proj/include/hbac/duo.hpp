#pragma once
// Replica of the rule-based student risk-profiling algorithm: the R1
// education factor, the R2 age-by-distance table (loaded from a file; no
// authoritative source exists), the R3 age-deviation adjustments, the
// score composition R1 * (R2 + R3), the six risk categories, and a
// synthetic cohort generator for end-to-end audit demos.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hbac/core.hpp"

namespace hbac::duo {

enum class Education { mbo12, mbo34, hbo, wo };
// Age bands used by the profiling characteristics.
enum class AgeBand { a15_18, a19_20, a21_22, a23_24, a25_50 };
// Age bands used by the R3 registration-history lookup.
enum class R3Age { a17_18, a19_20, a21_22, a23_24, a25_65 };
enum class Distance {
    d0km,
    d1m_1km,
    d1_2km,
    d2_5km,
    d5_10km,
    d10_20km,
    d20_50km,
    d50_500km,
    unknown,
};

const char* to_string(Education v);
const char* to_string(AgeBand v);
const char* to_string(R3Age v);
const char* to_string(Distance v);
Education education_from(const std::string& s);
AgeBand age_band_from(const std::string& s);
R3Age r3_age_from(const std::string& s);
Distance distance_from(const std::string& s);

inline constexpr std::size_t kEducationCount = 4;
inline constexpr std::size_t kAgeBandCount = 5;
// "unknown" is excluded from the feature encoding; profiling features are
// 4 education + 5 age + 8 distance = 17 binary columns after one-hot.
inline constexpr std::size_t kKnownDistanceCount = 8;

struct StudentRecord {
    Education education = Education::hbo;
    AgeBand age_current = AgeBand::a19_20;
    Distance distance = Distance::d10_20km;
    R3Age age_registered = R3Age::a19_20;
    R3Age age_gba = R3Age::a19_20;
};

// One row of the R3 table: inclusive integer age ranges for the current
// age, the age when registered away from the parental address, and the
// municipal-registry age, with the adjustment value. Triples not listed
// contribute 0.
struct R3Row {
    int current_lo, current_hi;
    int registered_lo, registered_hi;
    int gba_lo, gba_hi;
    double factor;
};

struct RiskTables {
    std::array<double, kEducationCount> r1{};   // indexed by Education
    // r2[age band][distance band]; NaN marks a missing entry.
    std::vector<std::vector<double>> r2;
    std::vector<R3Row> r3;

    double r1_factor(Education e) const { return r1[static_cast<std::size_t>(e)]; }
    // Throws Errc::unknown_distance / Errc::missing_table_entry.
    double r2_factor(AgeBand age, Distance distance) const;
    double r3_factor(AgeBand current, R3Age registered, R3Age gba) const;
};

// The built-in R1 and R3 values with the caller-supplied R2 table.
RiskTables make_risk_tables(std::vector<std::vector<double>> r2);
// R2 table file: header row of distance bands, one row per age band.
// R1 and R3 stay built in unless override files are given: R1 as
// "education,factor" rows, R3 as
// "current_lo,current_hi,registered_lo,registered_hi,gba_lo,gba_hi,factor".
RiskTables load_risk_tables(const std::string& r2_csv_path,
                            const std::string& r1_csv_path = "",
                            const std::string& r3_csv_path = "");

std::array<double, kEducationCount> builtin_r1();
std::vector<R3Row> builtin_r3();

// Score bin -> category 1..6 (6 is reserved for score exactly 0; fractional
// scores fall into the bin covering them). Requires 0 <= score <= 180.
int categorize(double score);

struct RiskOutcome {
    double score = 0.0;
    int category = 6;
    bool high_risk = false;  // category 1 or 2
    bool clamped = false;    // raw score exceeded 180 and was clamped
};

RiskOutcome risk_score(const StudentRecord& record, const RiskTables& tables);

struct CohortStratum {
    double weight = 0.0;
    StudentRecord record;
};

// Draws n records from the stratum mix (weights must sum to 1), scores
// them, and emits a dataset with the three categorical profiling columns
// expanded to 17 one-hot binary features and the binary high-risk flag as
// the metric. Deterministic in (n, mix, seed).
Dataset synth_cohort(std::size_t n, const std::vector<CohortStratum>& mix,
                     const RiskTables& tables, std::uint64_t seed);

}  // namespace hbac::duo
