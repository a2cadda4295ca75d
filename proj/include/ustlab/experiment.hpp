#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "ustlab/crt_ref.hpp"
#include "ustlab/errors.hpp"
#include "ustlab/graphs.hpp"
#include "ustlab/potential.hpp"
#include "ustlab/rng.hpp"
#include "ustlab/stats.hpp"
#include "ustlab/tree_metrics.hpp"
#include "ustlab/wilson.hpp"

namespace ustlab {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_names()
{
    static const std::vector<std::string> names{"diameter_law", "height_law",     "fdd_compare",
                                                "lower_mass",   "capacity_suite", "neg_corr_suite",
                                                "sunny_coupling", "srw_profile",  "crt_selfcheck"};
    return names;
}

struct ExperimentConfig {
    std::string experiment;
    std::optional<json> family; // as given; parsed by family_from_json
    std::uint64_t replicas = 1;
    std::uint64_t master_seed = 0;
    unsigned threads = 1;
    std::string output_dir = "out";
    json params = json::object();

    json echo() const
    {
        json j;
        j["experiment"] = experiment;
        if (family) j["family"] = *family;
        j["replicas"] = replicas;
        j["master_seed"] = master_seed;
        j["threads"] = threads;
        j["output_dir"] = output_dir;
        j["params"] = params;
        return j;
    }
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where)
{
    if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
T required_field(const json& obj, const char* key, const std::string& where)
{
    if (!obj.contains(key)) throw ConfigError(where + " is missing '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace detail

inline FamilySpec family_from_json(const json& j)
{
    const std::string where = "family";
    if (!j.is_object()) throw ConfigError("family must be a JSON object");
    const auto type = detail::required_field<std::string>(j, "type", where);
    if (type == "torus") {
        detail::reject_unknown_keys(j, {"type", "side", "dim"}, where);
        return torus(detail::required_field<std::uint32_t>(j, "side", where),
                     detail::required_field<std::uint32_t>(j, "dim", where));
    }
    if (type == "hypercube") {
        detail::reject_unknown_keys(j, {"type", "dim"}, where);
        return hypercube(detail::required_field<std::uint32_t>(j, "dim", where));
    }
    if (type == "complete") {
        detail::reject_unknown_keys(j, {"type", "n"}, where);
        return complete(detail::required_field<std::uint32_t>(j, "n", where));
    }
    if (type == "random_regular") {
        detail::reject_unknown_keys(j, {"type", "n", "degree", "seed"}, where);
        return random_regular(detail::required_field<std::uint32_t>(j, "n", where),
                              detail::required_field<std::uint32_t>(j, "degree", where),
                              detail::required_field<std::uint64_t>(j, "seed", where));
    }
    if (type == "composite_star") {
        detail::reject_unknown_keys(j, {"type", "parts", "masses"}, where);
        const auto& parts = j.at("parts");
        if (!parts.is_array() || parts.size() != 3) throw ConfigError("composite_star needs three parts");
        CompositeStarSpec s;
        for (const auto& p : parts) s.parts.push_back(family_from_json(p));
        s.masses = detail::required_field<std::array<double, 3>>(j, "masses", where);
        return s;
    }
    throw ConfigError("unknown family type '" + type + "'");
}

inline ExperimentConfig config_from_json(const json& j)
{
    const std::string where = "config";
    detail::reject_unknown_keys(j, {"experiment", "family", "replicas", "master_seed", "threads", "output_dir", "params"},
                                where);
    ExperimentConfig c;
    c.experiment = detail::required_field<std::string>(j, "experiment", where);
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), c.experiment) == names.end())
        throw ConfigError("unknown experiment '" + c.experiment + "'");
    if (j.contains("family")) {
        c.family = j.at("family");
        family_from_json(*c.family); // validate eagerly
    }
    c.replicas = detail::required_field<std::uint64_t>(j, "replicas", where);
    if (c.replicas < 1) throw ConfigError("replicas must be >= 1");
    if (j.contains("master_seed")) c.master_seed = detail::required_field<std::uint64_t>(j, "master_seed", where);
    if (j.contains("threads")) c.threads = detail::required_field<unsigned>(j, "threads", where);
    if (c.threads < 1) throw ConfigError("threads must be >= 1");
    if (j.contains("output_dir")) c.output_dir = detail::required_field<std::string>(j, "output_dir", where);
    if (j.contains("params")) {
        c.params = j.at("params");
        if (!c.params.is_object()) throw ConfigError("params must be a JSON object");
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

inline std::uint64_t config_hash(const json& echo) { return detail::fnv1a(echo.dump()); }

// ---------------------------------------------------------------------------
// Multi-scale schedule
// ---------------------------------------------------------------------------

struct ScaleLevel {
    std::uint32_t level = 0;
    double r = 0.0;
    double eps = 0.0;
    double k = 0.0;
};

struct Schedule {
    double levels_n = 0.0; // N_n = (alpha / 10) log2 n
    std::vector<ScaleLevel> levels;
};

/// r_l = c sqrt(n) / 2^l, eps_l = eps / 4^l, k_l = eps_l^(2/3) r_l for l <= N_n.
inline Schedule schedule_params(double n, double alpha, double c, double eps)
{
    require(n >= 2 && alpha > 0 && c > 0 && eps > 0, "schedule_params: need n >= 2 and positive alpha, c, eps");
    Schedule s;
    s.levels_n = alpha / 10.0 * std::log2(n);
    for (std::uint32_t l = 0; static_cast<double>(l) <= s.levels_n; ++l) {
        ScaleLevel lv;
        lv.level = l;
        lv.r = c * std::sqrt(n) / std::ldexp(1.0, static_cast<int>(l));
        lv.eps = eps / std::ldexp(1.0, 2 * static_cast<int>(l));
        lv.k = std::pow(lv.eps, 2.0 / 3.0) * lv.r;
        s.levels.push_back(lv);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

/// Runs f(i) for i in [0, count) on `threads` workers. Output placement is
/// the caller's job (write to slot i), so results do not depend on scheduling.
template <class F>
void parallel_for(std::uint64_t count, unsigned threads, F&& f)
{
    threads = static_cast<unsigned>(std::max<std::uint64_t>(1, std::min<std::uint64_t>(threads, count)));
    if (threads == 1) {
        for (std::uint64_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::uint64_t i = next++; i < count; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = count;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// ECDF overlay: sample ECDF against a reference curve or a reference sample.
struct PlotData {
    std::string title;
    std::string x_label;
    std::vector<double> sample;
    std::vector<double> reference_sample;
    std::function<double(double)> reference_cdf;
    double ks = 0.0;
};

struct ResultRecord {
    std::string experiment;
    json config_echo;
    std::uint64_t config_hash = 0;
    std::vector<std::string> columns; // after replica, seed_stream
    std::vector<std::vector<double>> rows;
    json summary = json::object();
    std::optional<bool> gate_passed;
    double wall_clock_seconds = 0.0;
    std::optional<PlotData> plot;
};

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string results_csv(const ResultRecord& r)
{
    std::string out = "replica,seed_stream";
    for (const auto& c : r.columns) out += "," + c;
    out += "\n";
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        out += std::to_string(i) + "," + std::to_string(i);
        for (double v : r.rows[i]) out += "," + format_double(v);
        out += "\n";
    }
    return out;
}

inline json summary_json(const ResultRecord& r)
{
    json j;
    j["experiment"] = r.experiment;
    j["config"] = r.config_echo;
    j["config_hash"] = detail::hex64(r.config_hash);
    j["replicas"] = r.rows.size();
    j["summary"] = r.summary;
    if (r.gate_passed) j["gate_passed"] = *r.gate_passed;
    j["wall_clock_seconds"] = r.wall_clock_seconds;
    return j;
}

/// Self-contained SVG of an ECDF against its reference.
inline std::string ecdf_svg(const PlotData& p)
{
    const double w = 640, h = 420, left = 60, right = 20, top = 40, bottom = 50;
    std::vector<double> xs = p.sample;
    std::sort(xs.begin(), xs.end());
    std::vector<double> ref = p.reference_sample;
    std::sort(ref.begin(), ref.end());
    double xmax = xs.empty() ? 1.0 : xs.back();
    if (!ref.empty()) xmax = std::max(xmax, ref.back());
    xmax = xmax > 0 ? xmax * 1.05 : 1.0;
    const double xmin = std::min(0.0, xs.empty() ? 0.0 : xs.front());
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (w - left - right); };
    auto py = [&](double y) { return h - bottom - y * (h - top - bottom); };

    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
      << ' ' << h << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << p.title << "</text>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << w - right << "\" y2=\"" << py(0)
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\"" << py(1)
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double y = i / 4.0;
        s << "<text x=\"" << left - 8 << "\" y=\"" << py(y) + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << y << "</text>\n";
        const double x = xmin + (xmax - xmin) * i / 4.0;
        s << "<text x=\"" << px(x) << "\" y=\"" << py(0) + 16
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << x << "</text>\n";
    }
    s << "<text x=\"" << w / 2 << "\" y=\"" << h - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << p.x_label << "</text>\n";

    auto step_path = [&](const std::vector<double>& v, const char* colour) {
        if (v.empty()) return;
        s << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"" << px(xmin) << ','
          << py(0);
        const double n = static_cast<double>(v.size());
        // Thin very large samples to at most ~2000 steps.
        const std::size_t stride = std::max<std::size_t>(1, v.size() / 2000);
        for (std::size_t i = 0; i < v.size(); i += stride) {
            s << ' ' << px(v[i]) << ',' << py(i / n) << ' ' << px(v[i]) << ',' << py((i + 1) / n);
        }
        s << ' ' << px(xmax) << ',' << py(1) << "\"/>\n";
    };
    step_path(xs, "#1f77b4");
    if (!ref.empty()) {
        step_path(ref, "#d62728");
    } else if (p.reference_cdf) {
        s << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"";
        for (int i = 0; i <= 400; ++i) {
            const double x = xmin + (xmax - xmin) * i / 400.0;
            s << (i ? " " : "") << px(x) << ',' << py(p.reference_cdf(x));
        }
        s << "\"/>\n";
    }
    s.precision(4);
    s << "<text x=\"" << w - right - 10 << "\" y=\"" << py(0.12)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"13\">KS = " << p.ks << "</text>\n";
    s << "<text x=\"" << w - right - 10 << "\" y=\"" << py(0.06)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#1f77b4\">sample</text>\n";
    s << "<text x=\"" << w - right - 60 << "\" y=\"" << py(0.06)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\">reference</text>\n";
    s << "</svg>\n";
    return s.str();
}

inline void write_outputs(const ResultRecord& r, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    auto write = [&](const char* name, const std::string& text) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw Error("cannot write " + (dir / name).string());
        out << text;
    };
    write("results.csv", results_csv(r));
    write("summary.json", summary_json(r).dump(2) + "\n");
    if (r.plot) write("plot.svg", ecdf_svg(*r.plot));
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

/// Stream ids above this are reserved for reference and bootstrap draws.
inline constexpr std::uint64_t kReferenceStreamBase = 1ULL << 40;
inline constexpr std::uint64_t kBootstrapStream = 1ULL << 41;

/// Tracks which params an experiment read so leftovers can be rejected.
class Params {
public:
    explicit Params(const json& j) : j_(j) {}

    template <class T>
    T get(const std::string& key, T fallback)
    {
        used_.insert(key);
        if (!j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("params." + key + ": " + e.what());
        }
    }

    template <class T>
    std::optional<T> optional(const std::string& key)
    {
        used_.insert(key);
        if (!j_.contains(key)) return std::nullopt;
        return get<T>(key, T{});
    }

    void finish() const
    {
        for (const auto& [key, value] : j_.items())
            if (!used_.count(key)) throw ConfigError("unknown key '" + key + "' in params");
    }

private:
    const json& j_;
    std::set<std::string> used_;
};

/// The tree a replica works on: the first draw from its stream. export-tree
/// reproduces it.
inline Tree replica_tree(const GraphHandle& g, RngStream& rng) { return sample_ust(g, 0, rng); }

/// Small regular graph for property suites (at most n_max vertices).
inline GraphHandle random_small_graph(RngStream& rng, std::uint32_t n_max)
{
    require(n_max >= 4, "random_small_graph: n_max must be >= 4");
    for (;;) {
        switch (rng.below(4)) {
        case 0: return build(complete(static_cast<std::uint32_t>(3 + rng.below(std::min<std::uint32_t>(14, n_max - 2)))));
        case 1: {
            const auto side = static_cast<std::uint32_t>(3 + rng.below(3));
            const auto dim = static_cast<std::uint32_t>(1 + rng.below(3));
            if (std::pow(side, dim) <= n_max) return build(torus(side, dim));
            break;
        }
        case 2: {
            const auto dim = static_cast<std::uint32_t>(2 + rng.below(5));
            if ((1u << dim) <= n_max) return build(hypercube(dim));
            break;
        }
        default: {
            const auto n = static_cast<std::uint32_t>(8 + 2 * rng.below((n_max - 6) / 2));
            const auto deg = static_cast<std::uint32_t>(3 + rng.below(3));
            if (n <= n_max && deg < n && (n * deg) % 2 == 0) return build(random_regular(n, deg, rng.next()));
            break;
        }
        }
    }
}

namespace detail {

inline VertexSet random_subset(RngStream& rng, std::size_t universe, std::size_t size)
{
    std::vector<Vertex> all(universe);
    for (Vertex v = 0; v < universe; ++v) all[v] = v;
    shuffle(all, rng);
    all.resize(std::min(size, universe));
    return VertexSet(universe, all);
}

struct Runner {
    const ExperimentConfig& cfg;
    ResultRecord& rec;
    Params params;

    GraphHandle graph() const
    {
        if (!cfg.family) throw ConfigError(cfg.experiment + " needs a family");
        return build(family_from_json(*cfg.family));
    }

    template <class F>
    void rows(F&& per_replica)
    {
        rec.rows.assign(cfg.replicas, {});
        parallel_for(cfg.replicas, cfg.threads, [&](std::uint64_t i) {
            RngStream rng(cfg.master_seed, i);
            rec.rows[i] = per_replica(i, rng);
        });
    }

    template <class F>
    std::vector<double> reference(std::uint64_t count, F&& draw)
    {
        std::vector<double> out(count);
        parallel_for(count, cfg.threads, [&](std::uint64_t j) {
            RngStream rng(cfg.master_seed, kReferenceStreamBase + j);
            out[j] = draw(rng);
        });
        return out;
    }

    std::vector<double> column(std::size_t c) const
    {
        std::vector<double> v;
        v.reserve(rec.rows.size());
        for (const auto& r : rec.rows) v.push_back(r[c]);
        return v;
    }

    void gate(std::optional<double> threshold, double ks)
    {
        if (!threshold) return;
        rec.gate_passed = ks < *threshold;
        rec.summary["ks_gate"] = *threshold;
    }
};

inline json stats_json(const std::vector<double>& v)
{
    const auto s = summarize(v);
    const Ecdf e(v);
    return {{"mean", s.mean},
            {"std_error", s.std_error},
            {"min", e.sorted_samples().front()},
            {"p10", e.quantile(0.1)},
            {"p50", e.quantile(0.5)},
            {"p90", e.quantile(0.9)},
            {"max", e.sorted_samples().back()}};
}

inline void run_diameter_law(Runner& r)
{
    const double beta = r.params.get("beta", 1.0);
    const auto ks_gate = r.params.optional<double>("ks_gate");
    r.params.finish();
    const auto g = r.graph();
    const double scale = beta * std::sqrt(static_cast<double>(g.n()));
    r.rec.columns = {"diameter", "diameter_scaled"};
    r.rows([&](std::uint64_t, RngStream& rng) {
        const TreeGraph t(replica_tree(g, rng));
        const double d = diameter(t);
        return std::vector<double>{d, d / scale};
    });
    const auto x = r.column(1);
    const SzekeresTable cdf;
    const auto ks = ks_one_sample(Ecdf(x), std::cref(cdf));
    r.rec.summary["diameter_scaled"] = stats_json(x);
    r.rec.summary["ks_vs_szekeres"] = ks.statistic;
    r.rec.summary["ks_p_value"] = ks.p_value();
    r.rec.summary["reference_mean"] = 4.0 / 3.0 * std::sqrt(2.0 * std::numbers::pi);
    r.gate(ks_gate, ks.statistic);
    r.rec.plot = PlotData{"diameter / (beta sqrt n) vs Szekeres", "scaled diameter", x, {}, cdf, ks.statistic};
}

inline void run_height_law(Runner& r)
{
    const auto root = r.params.get<Vertex>("root", 0);
    const auto refs = r.params.get<std::uint64_t>("reference_samples", 2000);
    const auto half = r.params.get<std::uint32_t>("excursion_n", 10000);
    const auto ks_gate = r.params.optional<double>("ks_gate");
    r.params.finish();
    const auto g = r.graph();
    require(root < g.n(), "height_law: root out of range");
    const double scale = std::sqrt(static_cast<double>(g.n()));
    r.rec.columns = {"height", "height_scaled"};
    r.rows([&](std::uint64_t, RngStream& rng) {
        const TreeGraph t(replica_tree(g, rng));
        const double h = height(t, root);
        return std::vector<double>{h, h / scale};
    });
    const auto x = r.column(1);
    const auto ref = r.reference(refs, [&](RngStream& rng) { return crt_height_sample(half, rng); });
    const auto ks = ks_two_sample(Ecdf(x), Ecdf(ref));
    r.rec.summary["height_scaled"] = stats_json(x);
    r.rec.summary["reference"] = stats_json(ref);
    r.rec.summary["ks_two_sample"] = ks.statistic;
    r.rec.summary["ks_p_value"] = ks.p_value();
    r.gate(ks_gate, ks.statistic);
    r.rec.plot = PlotData{"height / sqrt n vs CRT height", "scaled height", x, ref, {}, ks.statistic};
}

inline std::vector<double> normalized(std::vector<double> v)
{
    const double m = summarize(v).mean;
    require(m > 0.0, "normalized: mean must be positive");
    for (auto& x : v) x /= m;
    return v;
}

inline void run_fdd_compare(Runner& r)
{
    const auto m = r.params.get<std::size_t>("m", 2);
    const auto refs = r.params.get<std::uint64_t>("reference_samples", 100000);
    const auto half = r.params.get<std::uint32_t>("excursion_n", 10000);
    const auto ks_gate = r.params.optional<double>("ks_gate");
    r.params.finish();
    require(m >= 2, "fdd_compare: m must be >= 2");
    const auto g = r.graph();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            r.rec.columns.push_back("d_" + std::to_string(i) + "_" + std::to_string(j));
    r.rec.columns.push_back("metric_defect");
    r.rows([&](std::uint64_t, RngStream& rng) {
        const TreeGraph t(replica_tree(g, rng));
        auto s = fdd_sample(t, m, 1.0, rng);
        auto row = s.distances;
        row.push_back(tree_metric_defect(s));
        return row;
    });
    std::vector<double> all;
    double defect = 0.0;
    for (const auto& row : r.rec.rows) {
        all.insert(all.end(), row.begin(), row.end() - 1);
        defect = std::max(defect, row.back());
    }
    const double mean = summarize(all).mean;
    r.rec.summary["mean_distance"] = mean;
    r.rec.summary["max_metric_defect"] = defect;
    const auto shape = normalized(all);
    if (refs == 0) return;
    // One draw per reference stream; every pair of that draw joins the pool.
    std::vector<std::vector<double>> ref_rows(refs);
    parallel_for(refs, r.cfg.threads, [&](std::uint64_t j) {
        RngStream rng(r.cfg.master_seed, kReferenceStreamBase + j);
        ref_rows[j] = crt_fdd_sample(half, m, rng).distances;
    });
    std::vector<double> ref;
    for (const auto& row : ref_rows) ref.insert(ref.end(), row.begin(), row.end());
    const double ref_mean = summarize(ref).mean;
    const auto ks = ks_two_sample(Ecdf(shape), Ecdf(normalized(ref)));
    r.rec.summary["reference_mean"] = ref_mean;
    r.rec.summary["beta_hat"] = mean / (ref_mean * std::sqrt(static_cast<double>(g.n())));
    r.rec.summary["ks_shape_vs_crt"] = ks.statistic;
    r.rec.summary["ks_p_value"] = ks.p_value();
    r.gate(ks_gate, ks.statistic);
    r.rec.plot = PlotData{"pairwise distance / mean vs CRT", "normalized distance", shape, normalized(ref), {},
                          ks.statistic};
}

inline void run_lower_mass(Runner& r)
{
    const double c = r.params.get("c", 0.5);
    const double q = r.params.get("quantile", 0.9);
    const auto resamples = r.params.get<std::size_t>("bootstrap_resamples", 1000);
    r.params.finish();
    const auto g = r.graph();
    r.rec.columns = {"stat", "min_volume", "radius"};
    r.rows([&](std::uint64_t, RngStream& rng) {
        const TreeGraph t(replica_tree(g, rng));
        const auto rep = lower_mass(t, c);
        return std::vector<double>{rep.stat, static_cast<double>(rep.min_volume), static_cast<double>(rep.radius)};
    });
    const auto x = r.column(0);
    r.rec.summary["stat"] = stats_json(x);
    RngStream boot(r.cfg.master_seed, kBootstrapStream);
    const auto ci = bootstrap(x, [q](std::span<const double> s) { return quantile(s, q); }, resamples, boot);
    r.rec.summary["quantile"] = q;
    r.rec.summary["stat_quantile"] = ci.estimate;
    r.rec.summary["stat_quantile_ci95"] = {ci.lower, ci.upper};
    r.rec.summary["stat_quantile_bootstrap_se"] = ci.std_error;
    r.rec.summary["c"] = c;
}

inline void run_capacity_suite(Runner& r)
{
    const auto k_max = r.params.get<std::uint64_t>("k_max", 20);
    const auto n_max = r.params.get<std::uint32_t>("n_max", 64);
    const double tol = r.params.get("tolerance", 1e-12);
    r.params.finish();
    std::optional<GraphHandle> fixed;
    if (r.cfg.family) fixed = r.graph();
    static const std::vector<std::string> checks{"upper_bound", "green_lower_bound", "monotone_k", "monotone_set",
                                                 "additivity",  "close_symmetry",    "rel_le_cap", "partition"};
    r.rec.columns = {"n", "k", "u_size"};
    for (const auto& c : checks) r.rec.columns.push_back("viol_" + c);
    r.rows([&](std::uint64_t, RngStream& rng) {
        const GraphHandle g = fixed ? *fixed : random_small_graph(rng, n_max);
        const std::size_t n = g.n();
        const double dn = static_cast<double>(n);
        const std::uint64_t k = rng.below(k_max + 1);
        const auto u = random_subset(rng, n, 1 + rng.below(std::max<std::size_t>(1, n / 3)));
        const auto w = random_subset(rng, u.size(), 1 + rng.below(u.size()));
        VertexSet w_set(n);
        for (Vertex i : w.items()) w_set.insert(u.items()[i]);
        const auto other = random_subset(rng, n, 1 + rng.below(std::max<std::size_t>(1, n / 3)));
        Vertex extra = static_cast<Vertex>(rng.below(n));

        std::vector<double> viol(checks.size(), 0.0);
        const double cap_u = cap_k(g, u, k).value;
        viol[0] = cap_u > (k + 1) * u.size() / dn + tol;
        const double mk = m_k(g, u, k);
        viol[1] = cap_u < static_cast<double>(k) * u.size() * u.size() / (2.0 * dn * mk) - tol;
        viol[2] = cap_u > cap_k(g, u, k + 1).value + tol;
        auto bigger = u;
        bigger.insert(extra);
        viol[3] = cap_u > cap_k(g, bigger, k).value + tol;

        // Random partition of W into up to three blocks.
        const std::size_t blocks = 1 + rng.below(std::min<std::size_t>(3, w_set.size()));
        std::vector<VertexSet> parts(blocks, VertexSet(n));
        for (std::size_t i = 0; i < w_set.size(); ++i)
            parts[i < blocks ? i : rng.below(blocks)].insert(w_set.items()[i]);
        const double whole = rel_cap_k(g, w_set, set_difference(u, w_set), k).value;
        double sum = 0.0;
        for (const auto& a : parts) sum += rel_cap_k(g, a, set_difference(u, a), k).value;
        viol[4] = std::abs(sum - whole) > tol;
        viol[5] = std::abs(close_k(g, u, other, k) - close_k(g, other, u, k)) > tol;
        viol[6] = whole > cap_k(g, w_set, k).value + tol;

        if (whole > 0.0) {
            const double target = whole / static_cast<double>(1 + rng.below(4));
            const auto split = capacity_partition(g, w_set, u, k, target);
            const double window = target + (k + 1) / dn;
            bool bad = split.size() < static_cast<std::size_t>(std::floor(whole / window));
            VertexSet seen(n);
            for (const auto& a : split) {
                const double v = rel_cap_k(g, a, set_difference(u, a), k).value;
                bad = bad || v < target - tol || v > window + tol;
                for (Vertex x : a.items()) bad = bad || !seen.insert(x) || !w_set.contains(x);
            }
            viol[7] = bad;
        }
        std::vector<double> row{dn, static_cast<double>(k), static_cast<double>(u.size())};
        row.insert(row.end(), viol.begin(), viol.end());
        return row;
    });
    json totals = json::object();
    double all = 0.0;
    for (std::size_t c = 0; c < checks.size(); ++c) {
        double s = 0.0;
        for (const auto& row : r.rec.rows) s += row[3 + c];
        totals[checks[c]] = s;
        all += s;
    }
    r.rec.summary["violations"] = totals;
    r.rec.summary["total_violations"] = all;
    r.rec.gate_passed = all == 0.0;
}

inline void run_neg_corr_suite(Runner& r)
{
    const auto max_trees = r.params.get<std::uint64_t>("max_trees", 2'000'000);
    r.params.finish();
    std::vector<GraphHandle> pool;
    if (r.cfg.family)
        pool.push_back(r.graph());
    else
        pool = {build(complete(4)), build(complete(5)), build(torus(3, 2))};
    r.rec.columns = {"graph", "gamma_edges", "sets", "k", "trees", "lhs_power", "rhs_power", "holds_power",
                     "lhs_exp",   "rhs_exp",     "holds_exp"};
    r.rows([&](std::uint64_t, RngStream& rng) {
        const std::size_t gi = rng.below(pool.size());
        const auto& g = pool[gi];
        // Gamma: a self-avoiding walk with 2 or 3 edges.
        const std::size_t len = 2 + rng.below(2);
        std::vector<Vertex> path;
        while (path.size() != len + 1) {
            path.assign(1, static_cast<Vertex>(rng.below(g.n())));
            for (std::size_t s = 0; s < len; ++s) {
                const Vertex nxt = g.neighbor(path.back(), static_cast<std::uint32_t>(rng.below(g.degree(path.back()))));
                if (std::find(path.begin(), path.end(), nxt) != path.end()) break;
                path.push_back(nxt);
            }
        }
        std::vector<Edge> gamma;
        for (std::size_t s = 0; s < len; ++s) gamma.emplace_back(path[s], path[s + 1]);
        // 2 or 3 disjoint nonempty A_j drawn from gamma's vertices.
        auto verts = path;
        shuffle(verts, rng);
        const std::size_t m = 2 + rng.below(std::min<std::size_t>(2, verts.size() - 1));
        std::vector<std::vector<Vertex>> sets(m);
        for (std::size_t i = 0; i < verts.size(); ++i) {
            if (i < m)
                sets[i].push_back(verts[i]);
            else if (rng.bernoulli(0.5))
                sets[rng.below(m)].push_back(verts[i]);
        }
        const auto k = static_cast<std::uint32_t>(1 + rng.below(3));
        PowerExponents pe;
        for (std::size_t j = 0; j < m; ++j) pe.k.push_back(static_cast<std::uint32_t>(1 + rng.below(3)));
        const double phi = 0.05 + 1.95 * rng.uniform();
        const auto a = neg_corr_check(g, gamma, sets, k, pe, max_trees);
        const auto b = neg_corr_check(g, gamma, sets, k, ExponentialRate{phi}, max_trees);
        return std::vector<double>{static_cast<double>(gi), static_cast<double>(len), static_cast<double>(m),
                                   static_cast<double>(k), static_cast<double>(a.trees), a.lhs, a.rhs,
                                   a.holds ? 1.0 : 0.0, b.lhs, b.rhs, b.holds ? 1.0 : 0.0};
    });
    std::size_t fails = 0;
    for (const auto& row : r.rec.rows) fails += (row[7] == 0.0) + (row[10] == 0.0);
    r.rec.summary["configurations"] = r.rec.rows.size();
    r.rec.summary["failures"] = fails;
    r.rec.gate_passed = fails == 0;
}

inline void run_sunny_coupling(Runner& r)
{
    const auto zetas = r.params.get<std::vector<double>>("zetas", {0.8, 0.4, 0.1});
    const double se_gap = r.params.get("gate_se", 3.0);
    r.params.finish();
    require(!zetas.empty(), "sunny_coupling: zetas must be nonempty");
    const auto base = r.graph();
    require(base.n() >= 2, "sunny_coupling: need two base vertices");
    std::vector<GraphHandle> sunny;
    for (double z : zetas) sunny.push_back(add_sun(base, z));
    for (double z : zetas) {
        r.rec.columns.push_back("hit_sun_" + format_double(z));
        r.rec.columns.push_back("path_len_" + format_double(z));
    }
    r.rows([&](std::uint64_t, RngStream& rng) {
        const auto u = static_cast<Vertex>(rng.below(base.n()));
        auto v = static_cast<Vertex>(rng.below(base.n() - 1));
        v += v >= u ? 1 : 0;
        std::vector<double> row;
        for (const auto& g : sunny) {
            const auto b = sunny_branch(g, u, v, rng);
            row.push_back(b.hit_sun ? 1.0 : 0.0);
            row.push_back(static_cast<double>(b.path.size()));
        }
        return row;
    });
    json per = json::array();
    std::vector<double> p, se;
    for (std::size_t i = 0; i < zetas.size(); ++i) {
        const auto s = summarize(r.column(2 * i));
        p.push_back(s.mean);
        se.push_back(s.std_error);
        per.push_back({{"zeta", zetas[i]}, {"p_hit_sun", s.mean}, {"std_error", s.std_error}});
    }
    bool ok = true;
    for (std::size_t i = 0; i + 1 < p.size(); ++i)
        ok = ok && p[i] - p[i + 1] > se_gap * std::hypot(se[i], se[i + 1]);
    r.rec.summary["per_zeta"] = per;
    r.rec.summary["gate_se"] = se_gap;
    r.rec.gate_passed = ok;
}

inline void run_srw_profile(Runner& r)
{
    const double horizon = r.params.get("horizon", 1.0);
    const auto root = r.params.get<Vertex>("root", 0);
    const auto grid = r.params.get<std::size_t>("grid_points", 4);
    r.params.finish();
    const auto g = r.graph();
    require(root < g.n(), "srw_profile: root out of range");
    const double n = static_cast<double>(g.n());
    for (std::size_t j = 0; j <= grid; ++j)
        r.rec.columns.push_back("dist_t" + format_double(horizon * static_cast<double>(j) / static_cast<double>(grid)));
    r.rows([&](std::uint64_t, RngStream& rng) {
        const TreeGraph t(replica_tree(g, rng));
        return srw_on_tree(t, root, horizon, std::pow(n, 1.5), std::sqrt(n), rng, grid).distances;
    });
    json per = json::array();
    for (std::size_t j = 0; j <= grid; ++j) per.push_back(stats_json(r.column(j)));
    r.rec.summary["time_scale"] = "n^1.5";
    r.rec.summary["space_scale"] = "n^0.5";
    r.rec.summary["distance_by_grid_point"] = per;
}

inline void run_crt_selfcheck(Runner& r)
{
    const auto half = r.params.get<std::uint32_t>("excursion_n", 10000);
    const double gate = r.params.get("ks_gate", 0.05);
    r.params.finish();
    if (r.cfg.family) throw ConfigError("crt_selfcheck takes no family");
    r.rec.columns = {"diameter", "height"};
    r.rows([&](std::uint64_t, RngStream& rng) {
        const auto e = sample_excursion(half, rng);
        return std::vector<double>{excursion_diameter(e), excursion_height(e)};
    });
    const auto x = r.column(0);
    const SzekeresTable cdf;
    const auto ks = ks_one_sample(Ecdf(x), std::cref(cdf));
    const double mass = integrate([](double y) { return y > 0 ? szekeres_pdf(y) : 0.0; }, 0.0, 20.0);
    r.rec.summary["diameter"] = stats_json(x);
    r.rec.summary["height"] = stats_json(r.column(1));
    r.rec.summary["ks_vs_szekeres"] = ks.statistic;
    r.rec.summary["ks_p_value"] = ks.p_value();
    r.rec.summary["pdf_integral"] = mass;
    r.rec.summary["ks_gate"] = gate;
    r.rec.gate_passed = ks.statistic < gate && std::abs(mass - 1.0) <= 1e-6;
    r.rec.plot = PlotData{"CRT diameter (Dyck surrogate) vs Szekeres", "diameter", x, {}, cdf, ks.statistic};
}

} // namespace detail

/// Runs one experiment. Rows are indexed by replica, and replica i draws
/// only from RngStream(master_seed, i), so the CSV does not depend on the
/// thread count.
inline ResultRecord run(const ExperimentConfig& cfg)
{
    const auto start = std::chrono::steady_clock::now();
    ResultRecord rec;
    rec.experiment = cfg.experiment;
    rec.config_echo = cfg.echo();
    rec.config_hash = config_hash(rec.config_echo);
    detail::Runner r{cfg, rec, Params(cfg.params)};
    const auto& e = cfg.experiment;
    if (e == "diameter_law")
        detail::run_diameter_law(r);
    else if (e == "height_law")
        detail::run_height_law(r);
    else if (e == "fdd_compare")
        detail::run_fdd_compare(r);
    else if (e == "lower_mass")
        detail::run_lower_mass(r);
    else if (e == "capacity_suite")
        detail::run_capacity_suite(r);
    else if (e == "neg_corr_suite")
        detail::run_neg_corr_suite(r);
    else if (e == "sunny_coupling")
        detail::run_sunny_coupling(r);
    else if (e == "srw_profile")
        detail::run_srw_profile(r);
    else if (e == "crt_selfcheck")
        detail::run_crt_selfcheck(r);
    else
        throw ConfigError("unknown experiment '" + e + "'");
    rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

/// Tree of replica i of a config, as used by the tree experiments.
inline Tree export_tree(const ExperimentConfig& cfg, std::uint64_t replica)
{
    if (!cfg.family) throw ConfigError("export-tree needs a config with a family");
    const auto g = build(family_from_json(*cfg.family));
    RngStream rng(cfg.master_seed, replica);
    return replica_tree(g, rng);
}

} // namespace ustlab
