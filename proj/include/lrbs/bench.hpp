#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "adapt.hpp"
#include "checkpoint.hpp"
#include "errors.hpp"
#include "instance.hpp"
#include "io.hpp"
#include "mdp.hpp"
#include "parallel.hpp"
#include "policy.hpp"
#include "search.hpp"
#include "train.hpp"

namespace lrbs {

enum class OracleMode { exact, reference_file, none };

inline OracleMode parse_oracle_mode(const std::string& s)
{
    if (s == "exact") return OracleMode::exact;
    if (s == "reference-file" || s == "reference_file") return OracleMode::reference_file;
    if (s == "none") return OracleMode::none;
    throw invalid_argument("unknown oracle mode '" + s + "'");
}

inline const char* to_string(OracleMode m) noexcept
{
    switch (m) {
    case OracleMode::exact: return "exact";
    case OracleMode::reference_file: return "reference-file";
    case OracleMode::none: return "none";
    }
    return "?";
}

inline PdpVariant parse_variant(const std::string& s)
{
    if (s == "precedence") return PdpVariant::precedence;
    if (s == "lifo") return PdpVariant::lifo;
    throw invalid_argument("unknown PDP variant '" + s + "'");
}

struct MethodEntry {
    std::string label;
    Method method = Method::lrbs;
    SearchConfig search;
    AdaptConfig adapt;
};

struct ExperimentSpec {
    ProblemKind problem = ProblemKind::tsp;
    PdpVariant variant = PdpVariant::precedence;
    int n = 20; ///< nodes for TSP, requests for PDP
    int count = 10;
    std::uint64_t seed = 0;
    std::string dataset_path; ///< when set, instances are read from here instead of generated
    std::string policy_path;  ///< used by the CLI; empty or "uniform" means all-zero weights
    OracleMode oracle = OracleMode::exact;
    std::string reference_path;
    std::string output_path; ///< results CSV; empty keeps results in memory only
    double ft_fraction = 0.10;
    std::size_t workers = 1; ///< instance-level parallelism
    std::vector<MethodEntry> methods;

    void validate() const
    {
        if (count < 1) throw invalid_argument("experiment: count must be at least 1");
        if (methods.empty()) throw invalid_argument("experiment: no methods");
        if (!(ft_fraction > 0.0 && ft_fraction <= 1.0)) throw invalid_argument("experiment: ft_fraction must be in (0, 1]");
        if (oracle == OracleMode::reference_file && reference_path.empty())
            throw invalid_argument("experiment: oracle = reference-file needs a references path");
        std::set<std::string> labels;
        for (const auto& m : methods) {
            if (m.label.empty() || m.label.find(',') != std::string::npos)
                throw invalid_argument("experiment: method labels must be non-empty and comma-free");
            if (!labels.insert(m.label).second) throw invalid_argument("experiment: duplicate method label '" + m.label + "'");
            m.search.validate();
            m.adapt.validate();
        }
    }

    /// Fine-tuning set size for a test set of `dataset_size` instances.
    [[nodiscard]] int ft_size(std::size_t dataset_size) const
    {
        return std::max(1, static_cast<int>(std::lround(ft_fraction * static_cast<double>(dataset_size))));
    }
};

// ---------------------------------------------------------------------------
// Declarative spec files: `key = value` lines, one `method = <name> [k=v ...]`
// line per method. Keys mirror ExperimentSpec fields.

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_value(const std::string& key, const std::string& value, std::size_t line)
{
    T out{};
    if (!parse_number(value, out)) throw parse_error(line, "bad value '" + value + "' for " + key);
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v, std::size_t line)
{
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw parse_error(line, "bad boolean '" + v + "' for " + key);
}

inline MethodEntry parse_method_entry(const std::string& text, std::size_t line)
{
    std::istringstream ss(text);
    std::string name;
    ss >> name;
    MethodEntry m;
    try {
        m.method = parse_method(name);
    } catch (const invalid_argument& e) {
        throw parse_error(line, e.what());
    }
    m.label = to_string(m.method);
    std::string kv;
    while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw parse_error(line, "expected key=value, got '" + kv + "'");
        const auto key = kv.substr(0, eq);
        const auto val = kv.substr(eq + 1);
        if (key == "preset") {
            try {
                const auto workers = m.search.workers;
                m.search = default_config(val);
                m.search.workers = workers;
                m.adapt = default_adapt_config(val);
            } catch (const invalid_argument& e) {
                throw parse_error(line, e.what());
            }
        }
        else if (key == "label") m.label = val;
        else if (key == "beta") m.search.beta = parse_value<int>(key, val, line);
        else if (key == "alpha") m.search.alpha = parse_value<int>(key, val, line);
        else if (key == "n_s") m.search.n_s = parse_value<int>(key, val, line);
        else if (key == "t_max") m.search.t_max = parse_value<int>(key, val, line);
        else if (key == "workers") m.search.workers = parse_value<std::size_t>(key, val, line);
        else if (key == "dedup") m.search.dedup = parse_bool(key, val, line);
        else if (key == "lr") m.adapt.learning_rate = parse_value<double>(key, val, line);
        else if (key == "n_s_adapt") m.adapt.n_s_adapt = parse_value<int>(key, val, line);
        else if (key == "reset_per_instance") m.adapt.reset_per_instance = parse_bool(key, val, line);
        else if (key == "reset_batch") m.adapt.reset_batch = parse_value<int>(key, val, line);
        else if (key == "ft_size") m.adapt.ft_dataset_size = parse_value<int>(key, val, line);
        else if (key == "ft_carry_phi") m.adapt.ft_carry_phi = parse_bool(key, val, line);
        else throw parse_error(line, "unknown method option '" + key + "'");
    }
    return m;
}

} // namespace detail

inline ExperimentSpec read_spec(std::istream& is)
{
    ExperimentSpec spec;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(is, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const auto text = detail::trim(raw.substr(0, hash));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw parse_error(line, "expected 'key = value'");
        const auto key = detail::trim(text.substr(0, eq));
        const auto val = detail::trim(text.substr(eq + 1));
        try {
            if (key == "problem") spec.problem = parse_kind(val);
            else if (key == "variant") spec.variant = parse_variant(val);
            else if (key == "n") spec.n = detail::parse_value<int>(key, val, line);
            else if (key == "count") spec.count = detail::parse_value<int>(key, val, line);
            else if (key == "seed") spec.seed = detail::parse_value<std::uint64_t>(key, val, line);
            else if (key == "dataset") spec.dataset_path = val;
            else if (key == "policy") spec.policy_path = val;
            else if (key == "oracle") spec.oracle = parse_oracle_mode(val);
            else if (key == "references") spec.reference_path = val;
            else if (key == "output") spec.output_path = val;
            else if (key == "ft_fraction") spec.ft_fraction = detail::parse_value<double>(key, val, line);
            else if (key == "workers") spec.workers = detail::parse_value<std::size_t>(key, val, line);
            else if (key == "method") spec.methods.push_back(detail::parse_method_entry(val, line));
            else throw parse_error(line, "unknown key '" + key + "'");
        } catch (const invalid_argument& e) {
            throw parse_error(line, e.what());
        }
    }
    return spec;
}

inline ExperimentSpec read_spec(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return read_spec(is);
}

inline void write_spec(std::ostream& os, const ExperimentSpec& spec)
{
    os << "problem = " << to_string(spec.problem) << '\n'
       << "variant = " << to_string(spec.variant) << '\n'
       << "n = " << spec.n << '\n'
       << "count = " << spec.count << '\n'
       << "seed = " << spec.seed << '\n';
    if (!spec.dataset_path.empty()) os << "dataset = " << spec.dataset_path << '\n';
    if (!spec.policy_path.empty()) os << "policy = " << spec.policy_path << '\n';
    os << "oracle = " << to_string(spec.oracle) << '\n';
    if (!spec.reference_path.empty()) os << "references = " << spec.reference_path << '\n';
    if (!spec.output_path.empty()) os << "output = " << spec.output_path << '\n';
    os << "ft_fraction = " << detail::fmt17(spec.ft_fraction) << '\n' << "workers = " << spec.workers << '\n';
    for (const auto& m : spec.methods) {
        const auto& s = m.search;
        const auto& a = m.adapt;
        os << "method = " << to_string(m.method) << " label=" << m.label << " beta=" << s.beta << " alpha=" << s.alpha
           << " n_s=" << s.n_s << " t_max=" << s.t_max << " workers=" << s.workers
           << " dedup=" << (s.dedup ? "true" : "false") << " lr=" << detail::fmt17(a.learning_rate)
           << " n_s_adapt=" << a.n_s_adapt << " reset_per_instance=" << (a.reset_per_instance ? "true" : "false")
           << " reset_batch=" << a.reset_batch << " ft_size=" << a.ft_dataset_size
           << " ft_carry_phi=" << (a.ft_carry_phi ? "true" : "false") << '\n';
    }
}

// ---------------------------------------------------------------------------
// Datasets

/// Test instance i is generated from derive_seed(seed, {i}).
inline std::vector<AnyInstance> make_dataset(ProblemKind problem, int n, int count, std::uint64_t seed)
{
    std::vector<AnyInstance> out;
    for (int i = 0; i < count; ++i) {
        const auto s = derive_seed(seed, {static_cast<std::uint64_t>(i)});
        if (problem == ProblemKind::tsp) out.emplace_back(gen_uniform_tsp(n, s));
        else out.emplace_back(gen_uniform_pdp(n, s));
    }
    return out;
}

/// Fine-tuning instances come from a stream disjoint from the test set.
inline std::vector<AnyInstance> make_ft_dataset(ProblemKind problem, int n, int count, std::uint64_t seed)
{
    return make_dataset(problem, n, count, derive_seed(seed, {0xf7da7aULL}));
}

inline std::string instance_id(std::size_t index) { return std::to_string(index); }

// ---------------------------------------------------------------------------
// Experiment execution

struct ExperimentResult {
    std::vector<ResultRow> rows;      ///< method-major, instance order
    std::vector<ResultRow> summaries; ///< one per method
    std::vector<std::string> errors;
};

inline constexpr const char* summary_id = "summary";
inline constexpr const char* incomplete_summary_id = "summary-incomplete";

inline bool is_summary(const ResultRow& r) { return r.instance_id == summary_id || r.instance_id == incomplete_summary_id; }

/// Mean obj/opt/gap over successful rows; totals for steps and seconds.
inline ResultRow summarize(const std::string& method, const std::vector<ResultRow>& rows)
{
    ResultRow s;
    s.method = method;
    bool complete = true;
    double obj = 0.0, opt = 0.0, gap = 0.0;
    int n_obj = 0, n_opt = 0, n_gap = 0;
    for (const auto& r : rows) {
        if (r.method != method || is_summary(r)) continue;
        if (!r.ok()) {
            complete = false;
            continue;
        }
        obj += *r.obj;
        ++n_obj;
        if (r.opt) opt += *r.opt, ++n_opt;
        if (r.gap_percent) gap += *r.gap_percent, ++n_gap;
        s.steps += r.steps;
        s.seconds += r.seconds;
    }
    s.instance_id = complete && n_obj > 0 ? summary_id : incomplete_summary_id;
    if (n_obj) s.obj = obj / n_obj;
    if (n_opt) s.opt = opt / n_opt;
    if (n_gap && n_gap == n_obj) s.gap_percent = gap / n_gap;
    return s;
}

namespace detail {

template <typename F>
decltype(auto) with_env(const AnyInstance& inst, PdpVariant variant, F&& f)
{
    if (const auto* t = std::get_if<Instance>(&inst)) return f(TspEnv(*t));
    return f(PdpEnv(std::get<PdInstance>(inst), variant));
}

inline std::optional<double> reference_for(const ExperimentSpec& spec, const AnyInstance& inst, std::size_t index,
                                           const std::map<std::string, double>& refs)
{
    switch (spec.oracle) {
    case OracleMode::none: return std::nullopt;
    case OracleMode::reference_file: {
        const auto it = refs.find(instance_id(index));
        if (it == refs.end()) throw invalid_argument("no reference cost for instance " + instance_id(index));
        return it->second;
    }
    case OracleMode::exact: {
        std::optional<double> r;
        if (const auto* t = std::get_if<Instance>(&inst)) r = exact_reference(*t);
        else r = exact_reference(std::get<PdInstance>(inst), spec.variant);
        if (!r) throw invalid_argument("instance too large for the exact oracle; supply a reference file");
        return r;
    }
    }
    return std::nullopt;
}

inline void ensure_parent_dir(const std::string& path)
{
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

/// Appends rows to the results file as they finish, so interrupted runs can resume.
class RowSink {
public:
    explicit RowSink(std::string path) : path_(std::move(path))
    {
        if (path_.empty()) return;
        ensure_parent_dir(path_);
        const bool fresh = !std::filesystem::exists(path_) || std::filesystem::file_size(path_) == 0;
        os_.open(path_, std::ios::app);
        if (!os_) throw std::runtime_error("cannot open '" + path_ + "' for writing");
        if (fresh) os_ << results_header << '\n' << std::flush;
    }

    void append(const ResultRow& r)
    {
        if (path_.empty()) return;
        std::lock_guard lock(mu_);
        os_ << format_result_row(r) << '\n' << std::flush;
    }

    void close() { os_.close(); }

private:
    std::string path_;
    std::ofstream os_;
    std::mutex mu_;
};

} // namespace detail

inline std::vector<AnyInstance> load_dataset(const ExperimentSpec& spec)
{
    if (spec.dataset_path.empty()) return make_dataset(spec.problem, spec.n, spec.count, spec.seed);
    auto data = read_dataset(spec.dataset_path);
    if (data.empty()) throw invalid_argument("dataset '" + spec.dataset_path + "' is empty");
    return data;
}

/// Runs every (method, instance) cell. Instance i of every method is searched with
/// seed derive_seed(spec.seed, {i}) so methods are paired. With an output path the
/// run resumes from completed rows and finally rewrites the file in canonical order.
/// `frozen_phi`, if given, is applied by the non-adapting methods.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const PolicyParams& params,
                                       const EasParams* frozen_phi = nullptr)
{
    spec.validate();
    params.validate();
    if (frozen_phi && (frozen_phi->kind != params.kind || frozen_phi->phi.size() != params.layout().phi_size()))
        throw invalid_argument("adaptation weights do not match the policy");
    const auto data = load_dataset(spec);
    const std::size_t count = data.size();
    for (const auto& inst : data) {
        const bool is_tsp = std::holds_alternative<Instance>(inst);
        if (is_tsp != (params.kind == ProblemKind::tsp))
            throw invalid_argument("policy kind does not match the dataset problem");
    }
    std::map<std::string, double> refs;
    if (spec.oracle == OracleMode::reference_file) refs = read_references(spec.reference_path);

    // Previously completed cells.
    std::map<std::pair<std::string, std::string>, ResultRow> done;
    if (!spec.output_path.empty() && std::filesystem::exists(spec.output_path)) {
        for (auto& r : read_results(spec.output_path))
            if (!is_summary(r) && r.ok()) done[{r.method, r.instance_id}] = r;
    }

    ExperimentResult out;
    std::mutex err_mu;
    std::vector<std::optional<double>> opts(count);
    std::vector<std::string> opt_errors(count);
    parallel_for(count, spec.workers, [&](std::size_t i) {
        try {
            opts[i] = detail::reference_for(spec, data[i], i, refs);
        } catch (const std::exception& e) {
            opt_errors[i] = e.what();
        }
    });

    detail::RowSink sink(spec.output_path);
    for (const auto& m : spec.methods) {
        std::vector<ResultRow> rows(count);
        std::vector<char> have(count, 0);
        for (std::size_t i = 0; i < count; ++i) {
            const auto it = done.find({m.label, instance_id(i)});
            if (it != done.end()) rows[i] = it->second, have[i] = 1;
        }

        // Frozen phi for the fine-tuned method, trained once on a disjoint set.
        std::optional<EasParams> ft_phi;
        const bool need_run = std::count(have.begin(), have.end(), 0) > 0;
        if (m.method == Method::lrbs_ft && need_run) {
            const int ft_n = m.adapt.ft_dataset_size > 0 ? m.adapt.ft_dataset_size : spec.ft_size(count);
            const int size = std::visit([](const auto& x) { return x.size(); }, data.front());
            const int n_param = spec.problem == ProblemKind::tsp ? size : (size - 1) / 2;
            const auto ft_data = make_ft_dataset(spec.problem, n_param, ft_n, spec.seed);
            SearchConfig cfg = m.search;
            cfg.seed = derive_seed(spec.seed, {0xf1e7ULL});
            if (spec.problem == ProblemKind::tsp) {
                std::vector<TspEnv> envs;
                for (const auto& d : ft_data) envs.emplace_back(std::get<Instance>(d));
                ft_phi = fine_tune(params, envs, cfg, m.adapt);
            } else {
                std::vector<PdpEnv> envs;
                for (const auto& d : ft_data) envs.emplace_back(std::get<PdInstance>(d), spec.variant);
                ft_phi = fine_tune(params, envs, cfg, m.adapt);
            }
        }

        // Work units: single instances, or consecutive groups sharing phi for
        // online adaptation without per-instance reset.
        const std::size_t group =
            (m.method == Method::lrbs_oa && !m.adapt.reset_per_instance) ? static_cast<std::size_t>(m.adapt.reset_batch) : 1;
        const std::size_t units = (count + group - 1) / group;
        parallel_for(units, spec.workers, [&](std::size_t u) {
            const std::size_t lo = u * group;
            const std::size_t hi = std::min(count, lo + group);
            bool all_done = true;
            for (std::size_t i = lo; i < hi; ++i) all_done = all_done && have[i];
            if (all_done) return;
            std::optional<EasParams> shared;
            if (group > 1) shared = eas_wrap(params);
            for (std::size_t i = lo; i < hi; ++i) {
                ResultRow row;
                row.instance_id = instance_id(i);
                row.method = m.label;
                try {
                    if (!opt_errors[i].empty()) throw invalid_argument(opt_errors[i]);
                    SearchConfig cfg = m.search;
                    cfg.seed = derive_seed(spec.seed, {i});
                    const auto res = detail::with_env(data[i], spec.variant, [&](const auto& env) {
                        auto r = shared ? lrbs_adapting(env, params, *shared, cfg, m.adapt)
                                        : run_method(env, params, ft_phi ? &*ft_phi : frozen_phi, m.method, cfg, m.adapt);
                        r.best_length = canonical_length(env, r.best_solution);
                        return r;
                    });
                    row.obj = res.best_length;
                    row.opt = opts[i];
                    if (opts[i]) row.gap_percent = optimality_gap(res.best_length, *opts[i]);
                    row.steps = res.steps_consumed;
                    // Stored at the CSV's resolution so resumed and fresh summaries agree.
                    row.seconds = std::round(res.wall_seconds * 1e6) / 1e6;
                } catch (const std::exception& e) {
                    row.error = e.what();
                    std::lock_guard lock(err_mu);
                    out.errors.push_back(m.label + " on instance " + row.instance_id + ": " + e.what());
                }
                rows[i] = row;
                sink.append(row);
            }
        });

        out.summaries.push_back(summarize(m.label, rows));
        out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    }
    sink.close();

    std::sort(out.errors.begin(), out.errors.end());
    for (const auto& e : out.errors) std::cerr << "lrbs: cell failed: " << e << '\n';

    if (!spec.output_path.empty()) {
        std::ofstream os(spec.output_path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot rewrite '" + spec.output_path + "'");
        auto all = out.rows;
        all.insert(all.end(), out.summaries.begin(), out.summaries.end());
        write_results(os, all);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sensitivity sweep

struct SweepGrid {
    std::vector<int> t_max;
    std::vector<std::pair<int, int>> beta_alpha;
    std::vector<int> n_s; ///< empty keeps the base method's n_s
};

struct SweepRow {
    int t_max = 0;
    int beta = 0;
    int n_s = 0;
    int alpha = 0;
    std::string method;
    std::optional<double> obj;
    std::optional<double> gap_percent;
    double seconds = 0.0;
    bool complete = true;
};

inline constexpr const char* sweep_header = "t_max,beta,n_s,alpha,method,obj,gap_percent,seconds";

inline std::string format_sweep_row(const SweepRow& r)
{
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.6f", r.seconds);
    return std::to_string(r.t_max) + ',' + std::to_string(r.beta) + ',' + std::to_string(r.n_s) + ',' +
           std::to_string(r.alpha) + ',' + r.method + ',' + detail::opt_field(r.obj) + ',' +
           detail::opt_field(r.gap_percent) + ',' + secs;
}

/// One experiment per grid point using the first method of `base`. When the base
/// spec has an output path, each point writes `<stem>_T<t>_b<b>_n<n>_a<a>.csv` next
/// to it (so points resume independently) and the long table goes to the output path.
inline std::vector<SweepRow> sweep(const ExperimentSpec& base, const SweepGrid& grid, const PolicyParams& params)
{
    base.validate();
    if (grid.t_max.empty() || grid.beta_alpha.empty()) throw invalid_argument("sweep: empty grid");
    const auto& proto = base.methods.front();
    std::vector<int> n_s_values = grid.n_s.empty() ? std::vector<int>{proto.search.n_s} : grid.n_s;

    std::vector<SweepRow> rows;
    for (const auto& [beta, alpha] : grid.beta_alpha) {
        for (int n_s : n_s_values) {
            for (int t : grid.t_max) {
                ExperimentSpec spec = base;
                MethodEntry m = proto;
                m.search.beta = beta;
                m.search.alpha = alpha;
                m.search.n_s = n_s;
                m.search.t_max = t;
                m.search.validate();
                spec.methods = {m};
                if (!base.output_path.empty()) {
                    const std::filesystem::path p(base.output_path);
                    const auto name = p.stem().string() + "_T" + std::to_string(t) + "_b" + std::to_string(beta) +
                                      "_n" + std::to_string(n_s) + "_a" + std::to_string(alpha) + ".csv";
                    spec.output_path = (p.parent_path() / name).string();
                }
                const auto res = run_experiment(spec, params);
                const auto& s = res.summaries.front();
                rows.push_back({t, beta, n_s, alpha, m.label, s.obj, s.gap_percent, s.seconds, s.instance_id == summary_id});
            }
        }
    }
    if (!base.output_path.empty()) {
        detail::ensure_parent_dir(base.output_path);
        std::ofstream os(base.output_path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write '" + base.output_path + "'");
        os << sweep_header << '\n';
        for (const auto& r : rows) os << format_sweep_row(r) << '\n';
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Reporting

struct ReportEntry {
    std::string source;
    ResultRow summary;
};

/// Collects per-method summaries from results CSVs (files, or every *.csv in a
/// directory). Files whose first line is not the results header are skipped.
inline std::vector<ReportEntry> collect_report(const std::vector<std::string>& paths)
{
    std::vector<std::filesystem::path> files;
    for (const auto& p : paths) {
        if (std::filesystem::is_directory(p)) {
            for (const auto& e : std::filesystem::directory_iterator(p))
                if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        } else if (std::filesystem::exists(p)) {
            files.push_back(p);
        } else {
            throw std::runtime_error("no such file or directory '" + p + "'");
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<ReportEntry> out;
    for (const auto& f : files) {
        std::ifstream is(f);
        std::string first;
        if (!std::getline(is, first)) continue;
        if (!first.empty() && first.back() == '\r') first.pop_back();
        if (first != results_header) continue;
        const auto rows = read_results(f.string());
        std::vector<std::string> methods;
        for (const auto& r : rows)
            if (!is_summary(r) && std::find(methods.begin(), methods.end(), r.method) == methods.end())
                methods.push_back(r.method);
        for (const auto& m : methods) out.push_back({f.filename().string(), summarize(m, rows)});
    }
    return out;
}

inline std::string render_report_text(const std::vector<ReportEntry>& entries)
{
    if (entries.empty()) return "no results\n";
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-28s %-12s %12s %10s %12s %s\n", "file", "method", "obj", "gap%", "time(s)", "status");
    os << buf;
    for (const auto& e : entries) {
        const auto& s = e.summary;
        const std::string gap = s.gap_percent ? [&] {
            char g[32];
            std::snprintf(g, sizeof g, "%.4f", *s.gap_percent);
            return std::string(g);
        }() : std::string("-");
        std::snprintf(buf, sizeof buf, "%-28s %-12s %12.6f %10s %12.3f %s\n", e.source.c_str(), s.method.c_str(),
                      s.obj.value_or(std::nan("")), gap.c_str(), s.seconds,
                      s.instance_id == summary_id ? "complete" : "incomplete");
        os << buf;
    }
    return os.str();
}

inline std::string render_report_csv(const std::vector<ReportEntry>& entries)
{
    std::ostringstream os;
    os << "source," << results_header << '\n';
    for (const auto& e : entries) os << e.source << ',' << format_result_row(e.summary) << '\n';
    return os.str();
}

} // namespace lrbs
