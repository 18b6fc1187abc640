// tnml: train and inspect MPS classifiers, run the two-pixel toy and
// generative experiments. Subcommands: mnist-train, mnist-eval, toy,
// generative, inspect.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "tnml/data.hpp"
#include "tnml/mps.hpp"
#include "tnml/toy.hpp"
#include "tnml/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tnml;

namespace {

// All outputs go through a temp file + rename so failures never leave
// partial files behind.
void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string());
        os << content;
        if (!os) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

fs::path resolve_data_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("TNML_DATA_DIR")) return env;
    throw std::invalid_argument("no data directory: pass --data-dir or set TNML_DATA_DIR");
}

struct EvalMetrics {
    double error_rate = 0.0;
    std::size_t misclassified = 0;
    std::vector<std::vector<std::size_t>> confusion;
};

EvalMetrics evaluate_dataset(const Mps<double>& model, const EncodedDataset& data) {
    EvalMetrics m;
    m.confusion.assign(model.n_labels(), std::vector<std::size_t>(model.n_labels(), 0));
    for (std::size_t n = 0; n < data.n_examples; ++n) {
        const int got = predict(model, data.example(n));
        const int want = data.labels[n];
        ++m.confusion[want][got];
        if (got != want) ++m.misclassified;
    }
    m.error_rate = data.n_examples
                       ? static_cast<double>(m.misclassified) / data.n_examples
                       : 0.0;
    return m;
}

json metrics_json(const EvalMetrics& m) {
    return json{{"error_rate", m.error_rate},
                {"misclassified_count", m.misclassified},
                {"confusion_matrix", m.confusion}};
}

LocalFeatureMap map_from_flags(const std::string& kind, std::size_t d) {
    return LocalFeatureMap(feature_kind_from_string(kind), d);
}

// ---------------------------------------------------------------------------

struct MnistTrainArgs {
    std::string data_dir, test_dir, out_dir = "out";
    std::size_t m = 10;
    int sweeps = 3;
    double alpha = 1e-4;
    double cutoff = 1e-10;
    std::size_t subset = 0;  // 0 = full set
    std::size_t init_bond = 0;  // 0 = same as m
    std::size_t d = 2;
    std::string map = "half_angle";
    int steps_per_bond = 1;
    bool no_backtracking = false;
    bool no_deterministic = false;
    unsigned threads = 1;
    std::uint64_t seed = 0;
};

int run_mnist_train(const MnistTrainArgs& a) {
    const fs::path data_dir = resolve_data_dir(a.data_dir);
    const LocalFeatureMap map = map_from_flags(a.map, a.d);
    const std::optional<std::size_t> subset =
        a.subset ? std::optional<std::size_t>(a.subset) : std::nullopt;

    std::cout << "loading MNIST training data from " << data_dir << "\n";
    const auto train_raw = build_mnist(data_dir, MnistSplit::train, subset, a.seed);
    const auto train = EncodedDataset::build(train_raw.inputs, train_raw.n_features,
                                             train_raw.labels, map, 10);
    std::cout << "  " << train.n_examples << " examples, " << train.n_sites
              << " sites\n";

    std::optional<EncodedDataset> test;
    if (!a.test_dir.empty()) {
        const auto test_raw = build_mnist(a.test_dir, MnistSplit::test);
        test = EncodedDataset::build(test_raw.inputs, test_raw.n_features, test_raw.labels,
                                     map, 10);
        std::cout << "  test split: " << test->n_examples << " examples\n";
    }

    TrainConfig cfg;
    cfg.learning_rate = a.alpha;
    cfg.sweeps = a.sweeps;
    cfg.trunc.max_rank = a.m;
    cfg.trunc.cutoff = a.cutoff;
    cfg.steps_per_bond = a.steps_per_bond;
    cfg.backtracking = !a.no_backtracking;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    cfg.deterministic_reduction = !a.no_deterministic;

    const std::size_t init_bond = a.init_bond ? a.init_bond : a.m;
    auto model = Mps<double>::random(train.n_sites, a.d, 10, init_bond, a.seed, map.kind());
    SweepTrainer trainer(std::move(model), train, cfg);

    SweepReport report;
    std::vector<double> test_errors;
    for (int s = 0; s < a.sweeps; ++s) {
        auto stats = trainer.run_sweep();
        std::cout << "sweep " << stats.sweep << ": cost=" << stats.cost
                  << " train_error=" << stats.train_error << " max_bond="
                  << *std::max_element(stats.bond_dims.begin(), stats.bond_dims.end())
                  << " seconds=" << stats.seconds;
        if (test) {
            const auto m = evaluate_dataset(trainer.model(), *test);
            test_errors.push_back(m.error_rate);
            std::cout << " test_error=" << m.error_rate;
        }
        std::cout << std::endl;
        report.sweeps.push_back(std::move(stats));
    }

    fs::create_directories(a.out_dir);
    save_mps(trainer.model(), fs::path(a.out_dir) / "model.mpsc");
    {
        std::ostringstream os;
        report.write_jsonl(os);
        write_atomic(fs::path(a.out_dir) / "report.jsonl", os.str());
    }
    json config{{"command", "mnist-train"},
                {"data_dir", data_dir.string()},
                {"test_dir", a.test_dir},
                {"out", a.out_dir},
                {"m", a.m},
                {"init_bond", init_bond},
                {"sweeps", a.sweeps},
                {"alpha", a.alpha},
                {"cutoff", a.cutoff},
                {"subset", a.subset},
                {"d", a.d},
                {"map", a.map},
                {"steps_per_bond", a.steps_per_bond},
                {"backtracking", !a.no_backtracking},
                {"deterministic", !a.no_deterministic},
                {"threads", a.threads},
                {"seed", a.seed}};
    write_atomic(fs::path(a.out_dir) / "config.json", config.dump(2) + "\n");

    json metrics{{"final_cost", report.sweeps.back().cost},
                 {"final_train_error", report.sweeps.back().train_error}};
    if (!test_errors.empty()) {
        metrics["test_errors_per_sweep"] = test_errors;
        metrics["final_test_error"] = test_errors.back();
    }
    write_atomic(fs::path(a.out_dir) / "metrics.json", metrics.dump(2) + "\n");
    std::cout << "model written to " << (fs::path(a.out_dir) / "model.mpsc") << std::endl;
    return 0;
}

struct MnistEvalArgs {
    std::string model_path, data_dir, out_path;
    std::string split = "test";
    std::size_t subset = 0;
    std::uint64_t seed = 0;
    std::size_t d = 0;          // optional cross-checks against the model file
    std::string map;
};

int run_mnist_eval(const MnistEvalArgs& a) {
    const auto model = load_mps<double>(a.model_path);
    if (a.d != 0 && a.d != model.local_dim())
        throw std::invalid_argument("model was trained with d=" +
                                    std::to_string(model.local_dim()) +
                                    ", refusing --d " + std::to_string(a.d));
    if (!a.map.empty() && feature_kind_from_string(a.map) != model.map_kind())
        throw std::invalid_argument("model was trained with map " +
                                    to_string(model.map_kind()) + ", refusing --map " + a.map);
    const LocalFeatureMap map(model.map_kind(), model.local_dim());

    const fs::path data_dir = resolve_data_dir(a.data_dir);
    const auto split = a.split == "train" ? MnistSplit::train : MnistSplit::test;
    const std::optional<std::size_t> subset =
        a.subset ? std::optional<std::size_t>(a.subset) : std::nullopt;
    const auto raw = build_mnist(data_dir, split, subset, a.seed);
    const auto data =
        EncodedDataset::build(raw.inputs, raw.n_features, raw.labels, map, model.n_labels());

    const auto metrics = evaluate_dataset(model, data);
    const std::string text = metrics_json(metrics).dump(2) + "\n";
    if (a.out_path.empty())
        std::cout << text;
    else
        write_atomic(a.out_path, text);
    return 0;
}

struct ToyArgs {
    std::string task;
    std::string out_dir = "out";
    std::size_t d = 2;
    std::size_t n = 0;  // 0 = task default
    std::size_t grid = 128;
    std::size_t iters = 4000;
    double rate = 1.0;
    std::uint64_t seed = 0;
};

int run_toy(const ToyArgs& a) {
    const LocalFeatureMap map = a.d == 2 ? LocalFeatureMap(FeatureKind::half_angle, 2)
                                         : LocalFeatureMap(FeatureKind::spin_coherent, a.d);
    LabeledDataset pts;
    json metrics{{"task", a.task}};
    if (a.task == "gaussians") {
        GaussianPairParams params;
        params.n_per_class = a.n ? a.n : 100;
        pts = sample_gaussian_pair(params, a.seed);
    } else if (a.task == "spiral") {
        pts = spiral_dataset(a.n ? a.n : 250, a.seed);
    } else {
        throw std::invalid_argument("unknown toy task: " + a.task);
    }

    const auto w = train_full_quadratic(pts, map, a.iters, a.rate, a.seed);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto f = toy_scores(w, map, pts.input(i)[0], pts.input(i)[1]);
        std::size_t best = 0;
        for (std::size_t l = 1; l < f.size(); ++l)
            if (std::abs(f[l]) > std::abs(f[best])) best = l;
        correct += static_cast<int>(best) == pts.labels[i];
    }
    const double accuracy = static_cast<double>(correct) / pts.size();
    metrics["train_accuracy"] = accuracy;
    metrics["n_points"] = pts.size();
    metrics["d"] = a.d;

    const auto grid = decision_grid(w, map, a.grid);
    if (a.task == "gaussians") {
        const auto bayes = bayes_boundary(GaussianPairParams{}, a.grid);
        metrics["bayes_disagreement"] = grid_disagreement(grid.labels, bayes);
    }

    fs::create_directories(a.out_dir);
    {
        std::ostringstream os;
        write_csv(grid, os);
        write_atomic(fs::path(a.out_dir) / "decision_grid.csv", os.str());
    }
    {
        std::ostringstream os;
        write_csv(pts, os);
        write_atomic(fs::path(a.out_dir) / "train_points.csv", os.str());
    }
    json config{{"command", "toy"},    {"task", a.task}, {"d", a.d},
                {"n", a.n},            {"grid", a.grid}, {"iters", a.iters},
                {"rate", a.rate},      {"seed", a.seed}, {"out", a.out_dir}};
    write_atomic(fs::path(a.out_dir) / "config.json", config.dump(2) + "\n");
    write_atomic(fs::path(a.out_dir) / "metrics.json", metrics.dump(2) + "\n");
    std::cout << metrics.dump(2) << std::endl;
    return 0;
}

struct GenerativeArgs {
    std::string out_dir = "out";
    std::string sizes = "20,100,500,2500";
    std::size_t trials = 20;
    std::size_t grid = 256;
    std::size_t sample_grid = 128;
    std::size_t iters = 600;
    double rate = 0.25;
    std::uint64_t seed = 0;
};

int run_generative(const GenerativeArgs& a) {
    std::vector<std::size_t> sizes;
    std::stringstream ss(a.sizes);
    for (std::string tok; std::getline(ss, tok, ',');) sizes.push_back(std::stoul(tok));

    KlScanConfig cfg;
    cfg.trials = a.trials;
    cfg.grid_kl = a.grid;
    cfg.grid_sample = a.sample_grid;
    cfg.train_iters = a.iters;
    cfg.train_rate = a.rate;
    cfg.seed = a.seed;
    const auto result = kl_scan(sizes, cfg);

    fs::create_directories(a.out_dir);
    {
        std::ostringstream os;
        write_csv(result, os);
        write_atomic(fs::path(a.out_dir) / "kl_scan.csv", os.str());
    }
    json config{{"command", "generative"}, {"sizes", a.sizes},
                {"trials", a.trials},      {"grid", a.grid},
                {"sample_grid", a.sample_grid}, {"iters", a.iters},
                {"rate", a.rate},          {"seed", a.seed},
                {"out", a.out_dir}};
    write_atomic(fs::path(a.out_dir) / "config.json", config.dump(2) + "\n");
    json metrics{{"sigma", result.sigma},
                 {"fit_residual", result.fit_residual},
                 {"sizes", result.sizes},
                 {"mean_kl", result.mean_kl},
                 {"std_kl", result.std_kl}};
    write_atomic(fs::path(a.out_dir) / "metrics.json", metrics.dump(2) + "\n");
    std::cout << metrics.dump(2) << std::endl;
    return 0;
}

int run_inspect(const std::string& model_path, const std::string& out_path) {
    const auto kind = mps_file_scalar_kind(model_path);
    json info;
    auto fill = [&](const auto& model) {
        info["n_sites"] = model.n_sites();
        info["d"] = model.local_dim();
        info["n_labels"] = model.n_labels();
        info["label_site"] = model.label_site();
        info["map"] = to_string(model.map_kind());
        info["bond_dims"] = model.bond_dims();
        info["bond_singular_values"] = bond_spectra(model);
    };
    if (kind == 0)
        fill(load_mps<double>(model_path));
    else
        fill(load_mps<cplx>(model_path));
    const std::string text = info.dump(2) + "\n";
    if (out_path.empty())
        std::cout << text;
    else
        write_atomic(out_path, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MPS classifier training and toy experiments"};
    app.require_subcommand(1);

    MnistTrainArgs tr;
    auto* train_cmd = app.add_subcommand("mnist-train", "train an MPS classifier on MNIST");
    train_cmd->add_option("--data-dir", tr.data_dir, "directory with the IDX files");
    train_cmd->add_option("--test-dir", tr.test_dir, "directory with the test IDX files");
    train_cmd->add_option("--out", tr.out_dir, "output directory")->required();
    train_cmd->add_option("--m", tr.m, "maximum bond dimension");
    train_cmd->add_option("--sweeps", tr.sweeps, "number of sweeps");
    train_cmd->add_option("--alpha", tr.alpha, "gradient step on the summed gradient");
    train_cmd->add_option("--cutoff", tr.cutoff, "relative singular value cutoff");
    train_cmd->add_option("--subset", tr.subset, "stratified training subset size");
    train_cmd->add_option("--init-bond", tr.init_bond, "initial bond dimension (default m)");
    train_cmd->add_option("--d", tr.d, "local feature dimension");
    train_cmd->add_option("--map", tr.map, "feature map kind");
    train_cmd->add_option("--steps-per-bond", tr.steps_per_bond, "gradient steps per bond");
    train_cmd->add_flag("--no-backtracking", tr.no_backtracking, "disable step backtracking");
    train_cmd->add_flag("--no-deterministic", tr.no_deterministic,
                        "allow thread-dependent reduction order");
    train_cmd->add_option("--threads", tr.threads, "worker threads (0 = hardware)");
    train_cmd->add_option("--seed", tr.seed, "random seed");

    MnistEvalArgs ev;
    auto* eval_cmd = app.add_subcommand("mnist-eval", "evaluate a model on MNIST");
    eval_cmd->add_option("--model", ev.model_path, "model file")->required();
    eval_cmd->add_option("--data-dir", ev.data_dir, "directory with the IDX files");
    eval_cmd->add_option("--split", ev.split, "train or test")
        ->check(CLI::IsMember({"train", "test"}));
    eval_cmd->add_option("--subset", ev.subset, "stratified subset size");
    eval_cmd->add_option("--seed", ev.seed, "subset seed");
    eval_cmd->add_option("--out", ev.out_path, "metrics output file (default stdout)");
    eval_cmd->add_option("--d", ev.d, "expected local dimension (cross-check)");
    eval_cmd->add_option("--map", ev.map, "expected feature map (cross-check)");

    ToyArgs toy;
    auto* toy_cmd = app.add_subcommand("toy", "two-pixel toy experiments");
    toy_cmd->add_option("--task", toy.task, "gaussians or spiral")
        ->required()
        ->check(CLI::IsMember({"gaussians", "spiral"}));
    toy_cmd->add_option("--out", toy.out_dir, "output directory")->required();
    toy_cmd->add_option("--d", toy.d, "local feature dimension");
    toy_cmd->add_option("--n", toy.n, "points per class");
    toy_cmd->add_option("--grid", toy.grid, "decision grid resolution");
    toy_cmd->add_option("--iters", toy.iters, "gradient iterations");
    toy_cmd->add_option("--rate", toy.rate, "learning rate (mean gradient)");
    toy_cmd->add_option("--seed", toy.seed, "random seed");

    GenerativeArgs gen;
    auto* gen_cmd = app.add_subcommand("generative", "KL-vs-sample-size scan");
    gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();
    gen_cmd->add_option("--sizes", gen.sizes, "comma-separated sample sizes");
    gen_cmd->add_option("--trials", gen.trials, "trials per size");
    gen_cmd->add_option("--grid", gen.grid, "KL quadrature grid");
    gen_cmd->add_option("--sample-grid", gen.sample_grid, "sampling grid (>= 64)");
    gen_cmd->add_option("--iters", gen.iters, "NLL training iterations");
    gen_cmd->add_option("--rate", gen.rate, "NLL learning rate");
    gen_cmd->add_option("--seed", gen.seed, "random seed");

    std::string inspect_model, inspect_out;
    auto* inspect_cmd = app.add_subcommand("inspect", "summarize a model file");
    inspect_cmd->add_option("--model", inspect_model, "model file")->required();
    inspect_cmd->add_option("--out", inspect_out, "output file (default stdout)");

    try {
        app.parse(argc, argv);
        if (train_cmd->parsed()) return run_mnist_train(tr);
        if (eval_cmd->parsed()) return run_mnist_eval(ev);
        if (toy_cmd->parsed()) return run_toy(toy);
        if (gen_cmd->parsed()) return run_generative(gen);
        if (inspect_cmd->parsed()) return run_inspect(inspect_model, inspect_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
