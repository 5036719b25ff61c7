#pragma once

// CSV and SVG writers for sweep results.

#include "ecsr/core.hpp"
#include "ecsr/harness/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ecsr::harness {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw Error("format_double: conversion failed");
    return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw InvalidArgument("cannot parse number '" + std::string(s) + "'");
    return v;
}

inline constexpr std::string_view kTrialsHeader = "ensemble,gfun,inv_alpha,trial,seed,nmse,iters,converged,wall_ms";
inline constexpr std::string_view kSummaryHeader =
    "ensemble,gfun,inv_alpha,trials,mean_nmse,median_nmse,stderr_nmse,converged_rate,replica_mmse,replica_nmse";

/// Records in (run, 1/alpha, trial) order; wall time is the last column.
inline void write_trials_csv(std::ostream& out, std::vector<TrialRecord> records) {
    std::stable_sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
        return std::tie(a.run_index, a.grid_index, a.trial) < std::tie(b.run_index, b.grid_index, b.trial);
    });
    out << kTrialsHeader << '\n';
    for (const auto& r : records) {
        out << to_string(r.ensemble) << ',' << to_string(r.gfun) << ',' << format_double(r.inv_alpha) << ','
            << r.trial << ',' << r.seed << ',' << format_double(r.nmse) << ',' << r.iters << ','
            << (r.converged ? 1 : 0) << ',' << format_double(r.wall_ms) << '\n';
    }
}

inline void write_summary_csv(std::ostream& out, const std::vector<Aggregate>& rows) {
    out << kSummaryHeader << '\n';
    for (const auto& a : rows) {
        out << to_string(a.ensemble) << ',' << to_string(a.gfun) << ',' << format_double(a.inv_alpha) << ','
            << a.trials << ',' << format_double(a.mean_nmse) << ',' << format_double(a.median_nmse) << ','
            << format_double(a.stderr_nmse) << ',' << format_double(a.converged_rate) << ','
            << format_double(a.replica_mmse) << ',' << format_double(a.replica_nmse) << '\n';
    }
}

inline std::vector<Aggregate> read_summary_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kSummaryHeader) throw InvalidArgument("summary csv: bad header");
    std::vector<Aggregate> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 10) throw InvalidArgument("summary csv: expected 10 fields in '" + line + "'");
        Aggregate a;
        a.ensemble = parse_ensemble(f[0]);
        a.gfun = parse_gkind(f[1]);
        a.inv_alpha = parse_double(f[2]);
        a.trials = detail::parse_number<std::size_t>("trials", f[3]);
        a.mean_nmse = parse_double(f[4]);
        a.median_nmse = parse_double(f[5]);
        a.stderr_nmse = parse_double(f[6]);
        a.converged_rate = parse_double(f[7]);
        a.replica_mmse = parse_double(f[8]);
        a.replica_nmse = parse_double(f[9]);
        rows.push_back(a);
    }
    return rows;
}

struct CurveSeries {
    std::string label;
    std::vector<double> inv_alpha;
    std::vector<double> nmse;
    bool dashed = false;
};

/// Replica NMSE curve of one G kind over a grid; failed points are dropped.
inline CurveSeries replica_series(const PriorBG& prior, double sigma2, GKind kind, const std::vector<double>& grid,
                                  const ReplicaOptions& opt = {}) {
    CurveSeries s;
    s.label = kind == GKind::IidGaussianClosedForm ? "replica, i.i.d. Gaussian" : "replica, row-orthogonal";
    s.dashed = kind == GKind::IidGaussianClosedForm;
    const double q0 = prior.second_moment();
    for (const auto& pt : mse_curve(prior, sigma2, kind, grid, opt).points) {
        if (!pt.ok) continue;
        s.inv_alpha.push_back(pt.inv_alpha);
        s.nmse.push_back(pt.mmse / q0);
    }
    return s;
}

/// n points evenly spaced over [lo, hi].
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v;
    for (std::size_t k = 0; k < n; ++k)
        v.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1));
    return v;
}

namespace detail {

struct SymbolStyle {
    std::string shape;  // circle, cross, asterisk, square
    std::string color;
};

inline SymbolStyle symbol_style(EnsembleKind ensemble, GKind gfun) {
    if (ensemble == EnsembleKind::RowOrthogonal && gfun == GKind::RowOrthogonalClosedForm) return {"circle", "blue"};
    if (ensemble == EnsembleKind::IidGaussian && gfun == GKind::IidGaussianClosedForm) return {"cross", "green"};
    if (ensemble == EnsembleKind::RandomDct) return {"asterisk", "magenta"};
    return {"square", "darkorange"};
}

inline std::string series_label(EnsembleKind ensemble, GKind gfun) {
    const std::string solver = gfun == GKind::IidGaussianClosedForm ? "AMP (i.i.d. G)" : "EC (row-orthogonal G)";
    const std::string matrices = ensemble == EnsembleKind::IidGaussian     ? "i.i.d. Gaussian"
                                 : ensemble == EnsembleKind::RowOrthogonal ? "row-orthogonal"
                                                                           : "random DCT";
    return solver + " on " + matrices;
}

inline void draw_symbol(std::ostream& out, const SymbolStyle& st, double x, double y) {
    const double r = 4.5;
    if (st.shape == "circle") {
        out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"" << r << "\" fill=\"none\" stroke=\"" << st.color
            << "\" stroke-width=\"1.5\"/>\n";
    } else if (st.shape == "square") {
        out << "<rect x=\"" << x - r << "\" y=\"" << y - r << "\" width=\"" << 2 * r << "\" height=\"" << 2 * r
            << "\" fill=\"none\" stroke=\"" << st.color << "\" stroke-width=\"1.5\"/>\n";
    } else {
        out << "<path d=\"M" << x - r << ' ' << y - r << " L" << x + r << ' ' << y + r << " M" << x - r << ' ' << y + r
            << " L" << x + r << ' ' << y - r;
        if (st.shape == "asterisk") out << " M" << x << ' ' << y - r * 1.3 << " L" << x << ' ' << y + r * 1.3;
        out << "\" stroke=\"" << st.color << "\" stroke-width=\"1.5\" fill=\"none\"/>\n";
    }
}

}  // namespace detail

/// NMSE (log scale) vs 1/alpha: replica curves as lines, empirical means as symbols with
/// +-1 standard error bars, one symbol series per (ensemble, G) pairing.
inline void write_plot_svg(std::ostream& out, const std::vector<Aggregate>& rows, const std::vector<CurveSeries>& curves) {
    const double width = 640, height = 480, left = 80, right = 20, top = 20, bottom = 60;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    auto extend = [&](double x, double y) {
        if (!std::isfinite(x) || !std::isfinite(y) || y <= 0.0) return;
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    };
    for (const auto& c : curves)
        for (std::size_t k = 0; k < c.inv_alpha.size(); ++k) extend(c.inv_alpha[k], c.nmse[k]);
    for (const auto& a : rows) {
        extend(a.inv_alpha, a.mean_nmse - a.stderr_nmse);
        extend(a.inv_alpha, a.mean_nmse + a.stderr_nmse);
        extend(a.inv_alpha, a.mean_nmse);
    }
    if (!std::isfinite(xmin)) {
        xmin = 1.0;
        xmax = 2.0;
        ymin = 1e-3;
        ymax = 1.0;
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    const double pad = 0.05 * (xmax - xmin);
    xmin -= pad;
    xmax += pad;
    const double ly0 = std::floor(std::log10(ymin)), ly1 = std::max(std::ceil(std::log10(ymax)), ly0 + 1.0);
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (width - left - right); };
    auto py = [&](double y) {
        const double ly = std::log10(std::max(y, std::pow(10.0, ly0)));
        return top + (ly1 - ly) / (ly1 - ly0) * (height - top - bottom);
    };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width - left - right << "\" height=\""
        << height - top - bottom << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double e = ly0; e <= ly1 + 1e-9; e += 1.0) {
        const double y = py(std::pow(10.0, e));
        out << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << width - right << "\" y2=\"" << y
            << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << left - 8 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << static_cast<int>(e)
            << "</text>\n";
    }
    const double xstep = (xmax - xmin) > 4.0 ? 1.0 : 0.5;
    for (double x = std::ceil(xmin / xstep) * xstep; x <= xmax; x += xstep) {
        out << "<text x=\"" << px(x) << "\" y=\"" << height - bottom + 18 << "\" text-anchor=\"middle\">" << x
            << "</text>\n";
    }
    out << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 15
        << "\" text-anchor=\"middle\">1/alpha = N/M</text>\n";
    out << "<text transform=\"translate(20," << (top + height - bottom) / 2
        << ") rotate(-90)\" text-anchor=\"middle\">NMSE</text>\n";

    std::size_t legend = 0;
    auto legend_y = [&] { return top + 18.0 + 18.0 * static_cast<double>(legend++); };
    const double lx = left + 14;

    for (const auto& c : curves) {
        out << "<polyline class=\"curve\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"";
        if (c.dashed) out << " stroke-dasharray=\"6,4\"";
        out << " points=\"";
        for (std::size_t k = 0; k < c.inv_alpha.size(); ++k) out << px(c.inv_alpha[k]) << ',' << py(c.nmse[k]) << ' ';
        out << "\"/>\n";
        const double y = legend_y();
        out << "<line x1=\"" << lx << "\" y1=\"" << y << "\" x2=\"" << lx + 28 << "\" y2=\"" << y
            << "\" stroke=\"black\" stroke-width=\"1.5\"" << (c.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        out << "<text x=\"" << lx + 36 << "\" y=\"" << y + 4 << "\">" << c.label << "</text>\n";
    }

    std::vector<std::pair<EnsembleKind, GKind>> series;
    for (const auto& a : rows)
        if (std::find(series.begin(), series.end(), std::pair{a.ensemble, a.gfun}) == series.end())
            series.emplace_back(a.ensemble, a.gfun);
    for (const auto& [ens, gk] : series) {
        const auto st = detail::symbol_style(ens, gk);
        out << "<g class=\"series\" data-ensemble=\"" << to_string(ens) << "\" data-gfun=\"" << to_string(gk)
            << "\">\n";
        for (const auto& a : rows) {
            if (a.ensemble != ens || a.gfun != gk || !std::isfinite(a.mean_nmse) || a.mean_nmse <= 0.0) continue;
            const double x = px(a.inv_alpha);
            out << "<line x1=\"" << x << "\" y1=\"" << py(a.mean_nmse - a.stderr_nmse) << "\" x2=\"" << x
                << "\" y2=\"" << py(a.mean_nmse + a.stderr_nmse) << "\" stroke=\"" << st.color << "\"/>\n";
            detail::draw_symbol(out, st, x, py(a.mean_nmse));
        }
        out << "</g>\n";
        const double y = legend_y();
        detail::draw_symbol(out, st, lx + 14, y);
        out << "<text x=\"" << lx + 36 << "\" y=\"" << y + 4 << "\">" << detail::series_label(ens, gk) << "</text>\n";
    }
    out << "</svg>\n";
}

struct WrittenFiles {
    std::filesystem::path trials_csv;
    std::filesystem::path summary_csv;
    /// Empty when no plot was written.
    std::filesystem::path plot_svg;
};

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

}  // namespace detail

/// Writes the trials CSV, the summary CSV and, when there are aggregate rows, the plot.
inline WrittenFiles emit_outputs(const std::vector<TrialRecord>& records, const std::vector<Aggregate>& rows,
                                 const std::vector<CurveSeries>& curves, const OutputPaths& paths) {
    namespace fs = std::filesystem;
    const fs::path dir(paths.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
    WrittenFiles files{dir / paths.trials_csv, dir / paths.summary_csv, {}};
    {
        auto out = detail::open_output(files.trials_csv);
        write_trials_csv(out, records);
        if (!out) throw Error("write failed: " + files.trials_csv.string());
    }
    {
        auto out = detail::open_output(files.summary_csv);
        write_summary_csv(out, rows);
        if (!out) throw Error("write failed: " + files.summary_csv.string());
    }
    if (!rows.empty()) {
        files.plot_svg = dir / paths.plot_svg;
        auto out = detail::open_output(files.plot_svg);
        write_plot_svg(out, rows, curves);
        if (!out) throw Error("write failed: " + files.plot_svg.string());
    }
    return files;
}

}  // namespace ecsr::harness
