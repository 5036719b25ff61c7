// Command-line front end: single recoveries, replica curves, sweeps and the tiny-system oracle.

#include "ecsr/ecsr.hpp"
#include "ecsr/harness/config.hpp"
#include "ecsr/harness/experiment.hpp"
#include "ecsr/harness/oracle.hpp"
#include "ecsr/harness/outputs.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace ecsr;
using namespace ecsr::harness;
namespace fs = std::filesystem;

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> threads;
    std::optional<std::size_t> n;
    std::vector<std::string> ensembles;
    std::optional<std::string> gfun;
    std::vector<double> grid;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "master seed (u64)");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--trials", o.trials, "trials per grid point");
    cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
    cmd->add_option("--n", o.n, "signal dimension N");
    cmd->add_option("--ensemble", o.ensembles, "iid | rowortho | dct (repeatable)");
    cmd->add_option("--gfun", o.gfun, "iid | rowortho; G used by the solver")->check(CLI::IsMember({"iid", "rowortho"}));
    cmd->add_option("--inv-alpha", o.grid, "1/alpha grid (repeatable)");
}

ExperimentConfig build_config(const CommonOptions& o) {
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.outputs.out_dir = *o.out;
    if (o.trials) cfg.trials = *o.trials;
    if (o.threads) cfg.threads = *o.threads;
    if (o.n) cfg.n = *o.n;
    if (!o.grid.empty()) cfg.inverse_alpha_grid = o.grid;
    if (!o.ensembles.empty()) {
        cfg.runs.clear();
        for (const auto& e : o.ensembles) cfg.runs.push_back(parse_run_spec(e));
    }
    if (o.gfun) {
        const auto g = parse_gkind(*o.gfun);
        for (auto& r : cfg.runs) r.gfun = g;
    }
    return cfg;
}

Matrix read_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        std::vector<double> row;
        double v = 0.0;
        while (ls >> v) row.push_back(v);
        if (!ls.eof()) throw InvalidArgument("bad number in " + path);
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InvalidArgument(path + " is empty");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) throw InvalidArgument("ragged rows in " + path);
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

Vector read_vector(const std::string& path) {
    const Matrix m = read_matrix(path);
    if (m.cols() == 1) return m.col(0);
    if (m.rows() == 1) return m.row(0).transpose();
    throw InvalidArgument(path + " is not a vector");
}

fs::path prepare_out(const std::string& dir) {
    fs::create_directories(dir);
    return fs::path(dir);
}

int cmd_recover(const CommonOptions& o, double inv_alpha, const std::string& a_path, const std::string& y_path,
                const std::string& x0_path, std::optional<double> sigma2_opt) {
    ExperimentConfig cfg = build_config(o);
    if (sigma2_opt) cfg.sigma2 = *sigma2_opt;
    ObservationInstance obs;
    EnsembleKind ensemble = cfg.runs.front().ensemble;
    GKind gkind = cfg.runs.front().gfun;
    if (!a_path.empty()) {
        if (y_path.empty()) throw InvalidArgument("--a requires --y");
        obs.a = read_matrix(a_path);
        obs.y = read_vector(y_path);
        obs.sigma2 = cfg.sigma2;
        if (!x0_path.empty()) obs.x0 = read_vector(x0_path);
    } else {
        const EnsembleSpec spec{ensemble, cfg.n, cfg.measurements(inv_alpha)};
        obs = make_trial_instance(spec, cfg.prior, cfg.sigma2, cfg.seed);
    }
    const double alpha = static_cast<double>(obs.m()) / static_cast<double>(obs.n());
    const auto g = GFunction::make(gkind, alpha);
    const auto state = ec_solve(obs, cfg.prior, g, cfg.solver);

    std::cout << "N=" << obs.n() << " M=" << obs.m() << " G=" << to_string(gkind) << " iters=" << state.iter
              << " converged=" << (state.converged ? "yes" : "no") << " chi=" << state.chi << " E=" << state.e;
    if (obs.x0.size() == obs.a.cols()) std::cout << " nmse=" << nmse(state.m, obs.x0);
    std::cout << '\n';

    const auto dir = prepare_out(cfg.outputs.out_dir);
    std::ofstream out(dir / "recovered.csv");
    out << "i,m" << (obs.x0.size() ? ",x0" : "") << '\n';
    for (Eigen::Index i = 0; i < state.m.size(); ++i) {
        out << i << ',' << format_double(state.m[i]);
        if (obs.x0.size()) out << ',' << format_double(obs.x0[i]);
        out << '\n';
    }
    if (!out) throw Error("write failed: " + (dir / "recovered.csv").string());
    return 0;
}

int cmd_replica(const CommonOptions& o, const std::string& spectrum_path) {
    const ExperimentConfig cfg = build_config(o);
    std::vector<std::pair<std::string, std::function<GFunction(double)>>> kinds;
    if (!spectrum_path.empty()) {
        const auto spectrum = read_spectrum(spectrum_path);
        kinds.emplace_back("spectral", [spectrum](double) { return GFunction::spectral(spectrum); });
    } else if (o.gfun) {
        const auto k = parse_gkind(*o.gfun);
        kinds.emplace_back(std::string(to_string(k)), [k](double a) { return GFunction::make(k, a); });
    } else {
        for (auto k : {GKind::RowOrthogonalClosedForm, GKind::IidGaussianClosedForm})
            kinds.emplace_back(std::string(to_string(k)), [k](double a) { return GFunction::make(k, a); });
    }
    const auto dir = prepare_out(cfg.outputs.out_dir);
    const auto path = dir / "replica.csv";
    std::ofstream out(path);
    out << "gfun,inv_alpha,chi,e,mmse,nmse,branches,error\n";
    const double q0 = cfg.prior.second_moment();
    bool all_ok = true;
    for (const auto& [name, make] : kinds) {
        const auto curve = mse_curve(cfg.prior, cfg.sigma2, make, cfg.inverse_alpha_grid);
        for (const auto& pt : curve.points) {
            all_ok = all_ok && pt.ok;
            out << name << ',' << format_double(pt.inv_alpha) << ',';
            if (pt.ok) {
                out << format_double(pt.fixed_point.chi) << ',' << format_double(pt.fixed_point.e) << ','
                    << format_double(pt.mmse) << ',' << format_double(pt.mmse / q0) << ',' << pt.branches << ",\n";
            } else {
                out << ",,,,0,\"" << pt.error << "\"\n";
            }
            std::cout << std::setw(10) << name << "  1/alpha=" << std::setw(6) << pt.inv_alpha << "  "
                      << (pt.ok ? "nmse=" + format_double(pt.mmse / q0) : "error: " + pt.error) << '\n';
        }
        if (!curve.monotone) std::cerr << "warning: " << name << " curve is not monotone in 1/alpha\n";
    }
    if (!out) throw Error("write failed: " + path.string());
    std::cout << "wrote " << path.string() << '\n';
    return all_ok ? 0 : 1;
}

void print_summary(const std::vector<Aggregate>& rows) {
    std::cout << std::left << std::setw(10) << "ensemble" << std::setw(10) << "gfun" << std::setw(9) << "1/alpha"
              << std::setw(14) << "mean_nmse" << std::setw(14) << "stderr" << std::setw(14) << "replica"
              << "converged\n";
    for (const auto& a : rows) {
        std::cout << std::left << std::setw(10) << to_string(a.ensemble) << std::setw(10) << to_string(a.gfun)
                  << std::setw(9) << a.inv_alpha << std::setw(14) << a.mean_nmse << std::setw(14) << a.stderr_nmse
                  << std::setw(14) << a.replica_nmse << a.converged_rate << '\n';
    }
}

int run_sweep(const ExperimentConfig& cfg, std::size_t curve_points) {
    cfg.validate();
    const auto records = run_experiment(cfg);
    auto rows = summarize(records);
    attach_replica_predictions(rows, cfg);
    const auto [lo, hi] = std::minmax_element(cfg.inverse_alpha_grid.begin(), cfg.inverse_alpha_grid.end());
    const auto fine = linspace(*lo, *hi, curve_points);
    std::vector<CurveSeries> curves;
    for (auto k : {GKind::RowOrthogonalClosedForm, GKind::IidGaussianClosedForm})
        curves.push_back(replica_series(cfg.prior, cfg.sigma2, k, fine));
    const auto files = emit_outputs(records, rows, curves, cfg.outputs);
    print_summary(rows);
    std::cout << "wrote " << files.trials_csv.string() << ", " << files.summary_csv.string();
    if (!files.plot_svg.empty()) std::cout << ", " << files.plot_svg.string();
    std::cout << '\n';
    return 0;
}

int cmd_oracle(const CommonOptions& o, std::size_t n, std::size_t m, std::size_t instances) {
    const ExperimentConfig cfg = build_config(o);
    const auto ensemble = o.ensembles.empty() ? EnsembleKind::IidGaussian : parse_run_spec(o.ensembles.front()).ensemble;
    const auto cmp = compare_estimators(cfg.prior, cfg.sigma2, n, m, instances, cfg.seed, ensemble, cfg.solver);
    std::cout << "instances=" << cmp.instances << " N=" << n << " M=" << m << '\n'
              << "mse bayes=" << cmp.mse_bayes << " ridge=" << cmp.mse_ridge << " (se diff " << cmp.se_ridge_minus_bayes
              << ") zero=" << cmp.mse_zero << " (se diff " << cmp.se_zero_minus_bayes << ") ec=" << cmp.mse_ec
              << " (se diff " << cmp.se_ec_minus_bayes << ")\n"
              << "bayes dominates ridge and zero: " << (cmp.bayes_dominates() ? "yes" : "no") << '\n';
    const auto dir = prepare_out(cfg.outputs.out_dir);
    std::ofstream out(dir / "oracle.csv");
    out << "estimator,mse,se_diff_vs_bayes\n"
        << "bayes," << format_double(cmp.mse_bayes) << ",0\n"
        << "ridge," << format_double(cmp.mse_ridge) << ',' << format_double(cmp.se_ridge_minus_bayes) << '\n'
        << "zero," << format_double(cmp.mse_zero) << ',' << format_double(cmp.se_zero_minus_bayes) << '\n'
        << "ec," << format_double(cmp.mse_ec) << ',' << format_double(cmp.se_ec_minus_bayes) << '\n';
    return cmp.bayes_dominates() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EC signal recovery with ensemble-aware G-functions and replica predictions"};
    app.require_subcommand(1);

    CommonOptions recover_o, replica_o, sweep_o, fig1_o, oracle_o;

    auto* recover = app.add_subcommand("recover", "recover one instance (generated, or read with --a/--y)");
    add_common(recover, recover_o);
    double recover_inv_alpha = 2.0;
    std::string a_path, y_path, x0_path;
    std::optional<double> recover_sigma2;
    recover->add_option("--alpha-inv", recover_inv_alpha, "1/alpha of the generated instance")->check(CLI::Range(1.0, 1e9));
    recover->add_option("--a", a_path, "measurement matrix file (rows of numbers)")->check(CLI::ExistingFile);
    recover->add_option("--y", y_path, "observation vector file")->check(CLI::ExistingFile);
    recover->add_option("--x0", x0_path, "ground truth file, enables NMSE")->check(CLI::ExistingFile);
    recover->add_option("--sigma2", recover_sigma2, "noise variance");

    auto* replica = app.add_subcommand("replica", "replica NMSE curve to replica.csv");
    add_common(replica, replica_o);
    std::string spectrum_path;
    replica->add_option("--spectrum", spectrum_path, "'lambda weight' spectrum file for a numeric G")
        ->check(CLI::ExistingFile);

    auto* sweep = app.add_subcommand("sweep", "configured experiment: CSVs and plot");
    add_common(sweep, sweep_o);
    std::size_t curve_points = 41;
    sweep->add_option("--curve-points", curve_points, "points on each replica curve in the plot")
        ->check(CLI::Range(2, 10000));

    auto* fig1 = app.add_subcommand("fig1", "default NMSE-vs-1/alpha experiment with plot");
    add_common(fig1, fig1_o);

    auto* oracle = app.add_subcommand("oracle", "exact Bayes enumeration vs ridge, zero and EC on tiny systems");
    add_common(oracle, oracle_o);
    std::size_t oracle_n = 10, oracle_m = 5, oracle_instances = 100;
    oracle->add_option("--size", oracle_n, "N (<= 14)")->check(CLI::Range(1, 14));
    oracle->add_option("--measurements", oracle_m, "M");
    oracle->add_option("--instances", oracle_instances, "instances")->check(CLI::Range(2, 1000000));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*recover) return cmd_recover(recover_o, recover_inv_alpha, a_path, y_path, x0_path, recover_sigma2);
        if (*replica) return cmd_replica(replica_o, spectrum_path);
        if (*sweep) return run_sweep(build_config(sweep_o), curve_points);
        if (*fig1) {
            CommonOptions o = fig1_o;
            // fixed series and grid; only scale and output settings are taken from the flags
            o.ensembles.clear();
            o.gfun.reset();
            o.grid.clear();
            auto cfg = build_config(o);
            const ExperimentConfig defaults;
            cfg.runs = defaults.runs;
            cfg.inverse_alpha_grid = defaults.inverse_alpha_grid;
            return run_sweep(cfg, 41);
        }
        if (*oracle) return cmd_oracle(oracle_o, oracle_n, oracle_m, oracle_instances);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 2;
    }
    return 0;
}
