#pragma once

#include <stdexcept>
#include <string>

namespace hbac {

// Failure categories surfaced by the library. Violations found by
// validate() are data, not errors, and never throw.
enum class Errc {
    validation,
    degenerate_split,
    insufficient_data,
    insufficient_sample,
    degenerate_variance,
    degenerate_table,
    schema_mismatch,
    undefined_score,
    infeasible_grid,
    domain,
    single_class,
    missing_table_entry,
    unknown_distance,
    out_of_range,
    bad_config,
    io,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace hbac
