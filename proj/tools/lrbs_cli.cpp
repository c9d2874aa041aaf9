#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <lrbs/bench.hpp>
#include <lrbs/checkpoint.hpp>
#include <lrbs/io.hpp>
#include <lrbs/train.hpp>

namespace {

using namespace lrbs;

PolicyParams load_policy(const std::string& path, ProblemKind kind)
{
    if (path.empty() || path == "uniform") return PolicyParams::zeros(kind);
    auto cp = load_checkpoint(path);
    if (cp.params.kind != kind) throw invalid_argument("checkpoint '" + path + "' is for the other problem kind");
    return cp.params;
}

ProblemKind dataset_kind(const std::string& path)
{
    const auto data = read_dataset(path);
    if (data.empty()) throw invalid_argument("dataset '" + path + "' is empty");
    return std::holds_alternative<Instance>(data.front()) ? ProblemKind::tsp : ProblemKind::pdp;
}

std::vector<std::pair<int, int>> parse_pairs(const std::vector<std::string>& items)
{
    std::vector<std::pair<int, int>> out;
    for (const auto& s : items) {
        const auto x = s.find('x');
        int b = 0, a = 0;
        if (x == std::string::npos || !detail::parse_number(s.substr(0, x), b) || !detail::parse_number(s.substr(x + 1), a))
            throw invalid_argument("expected BETAxALPHA, got '" + s + "'");
        out.emplace_back(b, a);
    }
    return out;
}

struct SearchFlags {
    std::string preset;
    int beta = 0, alpha = 0, n_s = 0, t_max = 0;
    std::size_t workers = 1;

    void add(CLI::App* app)
    {
        app->add_option("--preset", preset, "configuration preset: tsp100, tsp150, tsp200, tsp500, tsp1000, pdp");
        app->add_option("--beta", beta, "beam width (overrides the preset)");
        app->add_option("--alpha", alpha, "children per beam node (overrides the preset)");
        app->add_option("--n-s", n_s, "rollout length (overrides the preset)");
        app->add_option("--t-max", t_max, "step budget (overrides the preset)");
        app->add_option("--search-workers", workers, "threads inside one search (0 = hardware)");
    }

    SearchConfig config() const
    {
        SearchConfig c = preset.empty() ? SearchConfig{} : default_config(preset);
        if (beta) c.beta = beta;
        if (alpha) c.alpha = alpha;
        if (n_s) c.n_s = n_s;
        if (t_max) c.t_max = t_max;
        c.workers = workers;
        return c;
    }
};

struct DataFlags {
    std::string dataset, policy, oracle = "exact", references, out;
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    void add(CLI::App* app)
    {
        app->add_option("--dataset", dataset, "instance file")->required();
        app->add_option("--policy", policy, "policy checkpoint (default: uniform policy)");
        app->add_option("--oracle", oracle, "exact | reference-file | none");
        app->add_option("--references", references, "reference costs CSV (instance_id,opt)");
        app->add_option("--out", out, "results CSV (resumable)");
        app->add_option("--seed", seed, "search seed");
        app->add_option("--workers", workers, "instance-level worker threads (0 = hardware)");
    }

    ExperimentSpec spec() const
    {
        ExperimentSpec s;
        s.problem = dataset_kind(dataset);
        s.dataset_path = dataset;
        s.policy_path = policy;
        s.oracle = parse_oracle_mode(oracle);
        s.reference_path = references;
        s.output_path = out;
        s.seed = seed;
        s.workers = workers;
        return s;
    }
};

void print_summaries(const ExperimentResult& r)
{
    std::vector<ReportEntry> entries;
    for (const auto& s : r.summaries) entries.push_back({"-", s});
    std::cout << render_report_text(entries);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Limited-rollout beam search toolkit for TSP and pickup-and-delivery"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a random dataset");
    std::string gen_problem = "tsp", gen_out;
    int gen_n = 20, gen_count = 10;
    std::uint64_t gen_seed = 0;
    gen->add_option("--problem", gen_problem, "tsp | pdp");
    gen->add_option("--n", gen_n, "nodes (tsp) or requests (pdp)");
    gen->add_option("--count", gen_count, "number of instances");
    gen->add_option("--seed", gen_seed, "dataset seed");
    gen->add_option("--out", gen_out, "output file")->required();

    // train
    auto* train = app.add_subcommand("train", "train the base policy with REINFORCE");
    TrainConfig tcfg;
    std::string train_problem = "tsp", train_variant = "precedence", train_out, train_curve;
    train->add_option("--problem", train_problem, "tsp | pdp");
    train->add_option("--variant", train_variant, "pdp constraint set: precedence | lifo");
    train->add_option("--n", tcfg.instance_size, "training instance size");
    train->add_option("--epochs", tcfg.epochs);
    train->add_option("--episodes", tcfg.episodes_per_epoch, "instances per epoch");
    train->add_option("--length", tcfg.episode_length, "steps per episode");
    train->add_option("--rollouts", tcfg.rollouts_per_instance, "episodes per instance");
    train->add_option("--lr", tcfg.learning_rate, "Adam learning rate");
    train->add_option("--seed", tcfg.seed);
    train->add_option("--workers", tcfg.workers, "worker threads (0 = hardware)");
    train->add_option("--out", train_out, "checkpoint path")->required();
    train->add_option("--curve", train_curve, "training curve CSV");

    // solve
    auto* solve = app.add_subcommand("solve", "run one method on a dataset");
    std::string solve_method = "lrbs", solve_variant = "precedence", solve_phi;
    SearchFlags solve_search;
    DataFlags solve_data;
    solve->add_option("--method", solve_method, "sample | lrbs | bs | sgbs_c | lrbs_oa");
    solve->add_option("--variant", solve_variant, "pdp constraint set: precedence | lifo");
    solve->add_option("--phi", solve_phi, "frozen adaptation weights (checkpoint with a phi tensor)");
    solve_search.add(solve);
    solve_data.add(solve);

    // adapt
    auto* adapt = app.add_subcommand("adapt", "run LRBS with fine-tuning (ft) or online adaptation (oa)");
    std::string adapt_mode = "oa", adapt_variant = "precedence", adapt_save_phi;
    double adapt_lr = -1.0, adapt_ft_fraction = 0.10;
    int adapt_n_s = -1, adapt_reset_batch = 1, adapt_ft_size = 0;
    bool adapt_shared = false;
    SearchFlags adapt_search;
    DataFlags adapt_data;
    adapt->add_option("--mode", adapt_mode, "ft | oa")->check(CLI::IsMember({"ft", "oa"}));
    adapt->add_option("--variant", adapt_variant, "pdp constraint set: precedence | lifo");
    adapt->add_option("--lr", adapt_lr, "adaptation learning rate");
    adapt->add_option("--n-s-adapt", adapt_n_s, "rollout length while adapting (0 keeps --n-s)");
    adapt->add_option("--ft-fraction", adapt_ft_fraction, "fine-tuning set size relative to the test set");
    adapt->add_option("--ft-size", adapt_ft_size, "fine-tuning set size (overrides --ft-fraction)");
    adapt->add_flag("--shared-phi", adapt_shared, "oa: share phi across batches of instances");
    adapt->add_option("--reset-batch", adapt_reset_batch, "oa with --shared-phi: instances per phi reset");
    adapt->add_option("--save-phi", adapt_save_phi, "ft: write the fine-tuned weights here");
    adapt_search.add(adapt);
    adapt_data.add(adapt);

    // sweep
    auto* sw = app.add_subcommand("sweep", "LRBS sensitivity sweep over (t_max, beta, alpha, n_s)");
    std::vector<int> sw_t = {100, 200, 500, 1000}, sw_ns;
    std::vector<std::string> sw_ba = {"60x1", "30x2", "20x3"};
    SearchFlags sw_search;
    DataFlags sw_data;
    sw->add_option("--t-max-list", sw_t, "budgets")->delimiter(',');
    sw->add_option("--beta-alpha", sw_ba, "BETAxALPHA pairs")->delimiter(',');
    sw->add_option("--n-s-list", sw_ns, "rollout lengths")->delimiter(',');
    sw_data.add(sw);

    // run
    auto* run = app.add_subcommand("run", "run an experiment spec file");
    std::string run_spec;
    run->add_option("spec", run_spec, "spec file")->required();

    // report
    auto* report = app.add_subcommand("report", "summarize result files");
    std::vector<std::string> report_paths = {"."};
    bool report_csv = false;
    report->add_option("paths", report_paths, "result files or directories");
    report->add_flag("--csv", report_csv, "emit CSV instead of a text table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const auto kind = parse_kind(gen_problem);
            write_dataset(gen_out, make_dataset(kind, gen_n, gen_count, gen_seed));
            std::cout << "wrote " << gen_count << " instances to " << gen_out << '\n';
        }
        else if (*train) {
            tcfg.kind = parse_kind(train_problem);
            tcfg.variant = parse_variant(train_variant);
            const auto res = train_base_policy(tcfg);
            save_checkpoint(train_out, res.params);
            if (!train_curve.empty()) {
                std::ofstream os(train_curve);
                os << "epoch,mean_return,mean_gap\n";
                for (const auto& r : res.curve)
                    os << r.epoch << ',' << detail::fmt17(r.mean_return) << ',' << (r.mean_gap ? detail::fmt17(*r.mean_gap) : "")
                       << '\n';
            }
            if (!res.curve.empty())
                std::cout << "final mean return " << res.curve.back().mean_return << " after " << res.curve.size()
                          << " epochs\n";
            return res.diverged ? 3 : 0;
        }
        else if (*solve) {
            auto spec = solve_data.spec();
            spec.variant = parse_variant(solve_variant);
            MethodEntry m;
            m.method = parse_method(solve_method);
            if (m.method == Method::lrbs_ft) throw invalid_argument("use the adapt subcommand for fine-tuning");
            m.label = to_string(m.method);
            m.search = solve_search.config();
            if (!solve_search.preset.empty()) m.adapt = default_adapt_config(solve_search.preset);
            spec.methods = {m};
            const auto params = load_policy(spec.policy_path, spec.problem);
            std::optional<EasParams> phi;
            if (!solve_phi.empty()) {
                phi = load_checkpoint(solve_phi).eas;
                if (!phi) throw invalid_argument("'" + solve_phi + "' has no phi tensor");
            }
            const auto res = run_experiment(spec, params, phi ? &*phi : nullptr);
            print_summaries(res);
            return res.errors.empty() ? 0 : 2;
        }
        else if (*adapt) {
            auto spec = adapt_data.spec();
            spec.variant = parse_variant(adapt_variant);
            spec.ft_fraction = adapt_ft_fraction;
            MethodEntry m;
            m.method = adapt_mode == "ft" ? Method::lrbs_ft : Method::lrbs_oa;
            m.label = to_string(m.method);
            m.search = adapt_search.config();
            if (!adapt_search.preset.empty()) m.adapt = default_adapt_config(adapt_search.preset);
            if (adapt_lr >= 0.0) m.adapt.learning_rate = adapt_lr;
            if (adapt_n_s >= 0) m.adapt.n_s_adapt = adapt_n_s;
            m.adapt.ft_dataset_size = adapt_ft_size;
            m.adapt.reset_per_instance = !adapt_shared;
            m.adapt.reset_batch = adapt_reset_batch;
            spec.methods = {m};
            const auto params = load_policy(spec.policy_path, spec.problem);
            if (!adapt_save_phi.empty()) {
                if (m.method != Method::lrbs_ft) throw invalid_argument("--save-phi applies to --mode ft");
                const auto data = load_dataset(spec);
                const int size = std::visit([](const auto& x) { return x.size(); }, data.front());
                const int n_param = spec.problem == ProblemKind::tsp ? size : (size - 1) / 2;
                const int ft_n = adapt_ft_size > 0 ? adapt_ft_size : spec.ft_size(data.size());
                const auto ft_data = make_ft_dataset(spec.problem, n_param, ft_n, spec.seed);
                SearchConfig cfg = m.search;
                cfg.seed = derive_seed(spec.seed, {0xf1e7ULL});
                EasParams phi;
                if (spec.problem == ProblemKind::tsp) {
                    std::vector<TspEnv> envs;
                    for (const auto& d : ft_data) envs.emplace_back(std::get<Instance>(d));
                    phi = fine_tune(params, envs, cfg, m.adapt);
                } else {
                    std::vector<PdpEnv> envs;
                    for (const auto& d : ft_data) envs.emplace_back(std::get<PdInstance>(d), spec.variant);
                    phi = fine_tune(params, envs, cfg, m.adapt);
                }
                save_checkpoint(adapt_save_phi, params, &phi);
            }
            const auto res = run_experiment(spec, params);
            print_summaries(res);
            return res.errors.empty() ? 0 : 2;
        }
        else if (*sw) {
            auto spec = sw_data.spec();
            MethodEntry m;
            m.label = "lrbs";
            m.search = sw_search.config();
            spec.methods = {m};
            const auto params = load_policy(spec.policy_path, spec.problem);
            const auto rows = sweep(spec, {sw_t, parse_pairs(sw_ba), sw_ns}, params);
            std::cout << sweep_header << '\n';
            for (const auto& r : rows) std::cout << format_sweep_row(r) << '\n';
        }
        else if (*run) {
            const auto spec = read_spec(run_spec);
            const auto params = load_policy(spec.policy_path, spec.problem);
            const auto res = run_experiment(spec, params);
            print_summaries(res);
            return res.errors.empty() ? 0 : 2;
        }
        else if (*report) {
            const auto entries = collect_report(report_paths);
            std::cout << (report_csv && !entries.empty() ? render_report_csv(entries) : render_report_text(entries));
        }
    } catch (const std::exception& e) {
        std::cerr << "lrbs: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
