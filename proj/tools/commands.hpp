#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace robustutil::cli {

enum ExitCode : int {
    kOk = 0,
    kInputError = 1,
    kInfeasible = 2,
    kNonConvergence = 3,
};

enum class Format { Json, Csv };

struct RunConfig {
    std::string command;
    std::string scenario;
    std::string utility = "power:0.5";
    double wealth = 1.0;
    double tol = 1e-9;
    int nodes = 64;
    bool nodes_set = false;
    std::uint64_t seed = 42;
    std::string out;
    Format format = Format::Json;
    unsigned threads = 1;
    /// Report measured wall time; otherwise 0 keeps documents byte-identical.
    bool timing = false;

    // verify-bs and gen-scenario
    double sigma = 0.5;
    double T = 1.0;
    double A = 1.1;
    double s0 = 1.0;
    std::optional<double> rel_tol;
    bool with_constraint = true;

    // vcurve
    std::vector<double> y_grid;
};

/// Runs one command; documents go to `out`, diagnostics to `err`.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Parses argv and runs the selected command.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace robustutil::cli
