#pragma once

// Experiment configuration and its flat "key = value" file format.
//
// Recognized keys (one per line, '#' starts a comment):
//   rho, sigma_x2, sigma2, n, trials, seed, threads
//   ensembles           comma-separated ensemble[:gfun] tokens, e.g. "rowortho, iid:iid, dct:rowortho";
//                       gfun defaults to the ensemble's own G (iid for iid, rowortho otherwise)
//   inverse_alpha_grid  comma-separated 1/alpha values (>= 1)
//   gamma, max_iter, tol, init_chi    solver parameters
//   out_dir, trials_csv, summary_csv, plot_svg   output locations (file names are relative to out_dir)

#include "ecsr/core.hpp"
#include "ecsr/ec_solver.hpp"
#include "ecsr/ensembles.hpp"
#include "ecsr/gfunc.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace ecsr::harness {

/// One (matrix ensemble, solver G) pairing in a sweep.
struct RunSpec {
    EnsembleKind ensemble = EnsembleKind::RowOrthogonal;
    GKind gfun = GKind::RowOrthogonalClosedForm;

    friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

/// G whose spectrum matches the ensemble (random DCT shares the row-orthogonal spectrum).
inline GKind matched_gkind(EnsembleKind kind) {
    return kind == EnsembleKind::IidGaussian ? GKind::IidGaussianClosedForm : GKind::RowOrthogonalClosedForm;
}

struct OutputPaths {
    std::string out_dir = ".";
    std::string trials_csv = "trials.csv";
    std::string summary_csv = "summary.csv";
    std::string plot_svg = "nmse.svg";
};

struct ExperimentConfig {
    PriorBG prior{0.1, 1.0};
    double sigma2 = 0.01;
    std::size_t n = 1024;
    std::vector<RunSpec> runs{{EnsembleKind::RowOrthogonal, GKind::RowOrthogonalClosedForm},
                              {EnsembleKind::IidGaussian, GKind::IidGaussianClosedForm},
                              {EnsembleKind::RandomDct, GKind::RowOrthogonalClosedForm}};
    std::vector<double> inverse_alpha_grid{1.25, 1.5, 2.0, 2.5, 3.0, 4.0};
    std::size_t trials = 200;
    SolverParams solver{};
    std::uint64_t seed = 1;
    /// Worker threads; 0 means one per hardware thread.
    std::size_t threads = 0;
    OutputPaths outputs{};

    /// Measurement count used at a grid point: round(n / inv_alpha), at least 1.
    std::size_t measurements(double inv_alpha) const {
        const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) / inv_alpha));
        return std::clamp<std::size_t>(m, 1, n);
    }

    void validate() const {
        prior.validate();
        if (!(sigma2 > 0.0)) throw InvalidArgument("config: sigma2 must be positive");
        if (n < 16) throw InvalidArgument("config: n must be at least 16");
        if (trials < 1) throw InvalidArgument("config: trials must be at least 1");
        if (runs.empty()) throw InvalidArgument("config: no ensembles configured");
        if (inverse_alpha_grid.empty()) throw InvalidArgument("config: empty inverse_alpha_grid");
        for (double v : inverse_alpha_grid)
            if (!(v >= 1.0) || !std::isfinite(v)) throw InvalidArgument("config: inverse_alpha_grid values must be >= 1");
        for (const auto& r : runs)
            if (r.gfun == GKind::SpectralNumeric)
                throw InvalidArgument("config: sweeps support only the iid and rowortho G-functions");
        solver.validate(n);
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto comma = s.find(',', start);
        if (comma == std::string_view::npos) comma = s.size();
        auto tok = trim(s.substr(start, comma - start));
        if (!tok.empty()) out.push_back(std::move(tok));
        start = comma + 1;
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw InvalidArgument("config: cannot parse value '" + text + "' for key '" + key + "'");
    return value;
}

}  // namespace detail

inline RunSpec parse_run_spec(std::string_view token) {
    const auto colon = token.find(':');
    RunSpec run;
    run.ensemble = parse_ensemble(detail::trim(token.substr(0, colon)));
    run.gfun = colon == std::string_view::npos ? matched_gkind(run.ensemble)
                                               : parse_gkind(detail::trim(token.substr(colon + 1)));
    return run;
}

/// Applies one key/value pair to the config; unknown keys are rejected.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_number;
    if (key == "rho") cfg.prior.rho = parse_number<double>(key, value);
    else if (key == "sigma_x2") cfg.prior.sigma_x2 = parse_number<double>(key, value);
    else if (key == "sigma2") cfg.sigma2 = parse_number<double>(key, value);
    else if (key == "n") cfg.n = parse_number<std::size_t>(key, value);
    else if (key == "trials") cfg.trials = parse_number<std::size_t>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "threads") cfg.threads = parse_number<std::size_t>(key, value);
    else if (key == "gamma") cfg.solver.gamma = parse_number<double>(key, value);
    else if (key == "max_iter") cfg.solver.max_iter = parse_number<std::size_t>(key, value);
    else if (key == "tol") cfg.solver.tol = parse_number<double>(key, value);
    else if (key == "init_chi") cfg.solver.init_chi = parse_number<double>(key, value);
    else if (key == "out_dir") cfg.outputs.out_dir = value;
    else if (key == "trials_csv") cfg.outputs.trials_csv = value;
    else if (key == "summary_csv") cfg.outputs.summary_csv = value;
    else if (key == "plot_svg") cfg.outputs.plot_svg = value;
    else if (key == "ensembles") {
        cfg.runs.clear();
        for (const auto& tok : detail::split_list(value)) cfg.runs.push_back(parse_run_spec(tok));
    } else if (key == "inverse_alpha_grid") {
        cfg.inverse_alpha_grid.clear();
        for (const auto& tok : detail::split_list(value))
            cfg.inverse_alpha_grid.push_back(parse_number<double>(key, tok));
    } else {
        throw InvalidArgument("config: unknown key '" + key + "'");
    }
}

inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto text = detail::trim(line);
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw InvalidArgument("config line " + std::to_string(lineno) + ": expected 'key = value'");
        apply_setting(cfg, detail::trim(std::string_view(text).substr(0, eq)),
                      detail::trim(std::string_view(text).substr(eq + 1)));
    }
    return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig cfg = {}) {
    std::istringstream in(text);
    return parse_config(in, std::move(cfg));
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig cfg = {}) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file " + path);
    return parse_config(in, std::move(cfg));
}

inline std::size_t worker_count(const ExperimentConfig& cfg) {
    if (cfg.threads > 0) return cfg.threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace ecsr::harness
