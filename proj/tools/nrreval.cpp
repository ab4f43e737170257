// nrreval: ground-truth-free evaluation of non-rigid registration.

#include "nrreval/cps_warp.hpp"
#include "nrreval/io.hpp"
#include "nrreval/model_io.hpp"
#include "nrreval/overlap.hpp"
#include "nrreval/parallel.hpp"
#include "nrreval/phantom.hpp"
#include "nrreval/pipeline.hpp"
#include "nrreval/specificity.hpp"
#include "nrreval/texture_model.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace nrreval;

namespace
{

struct Options
{
    std::string manifest;
    std::vector<std::string> manifests;
    std::string model_dir;
    std::string out = "-";
    std::string out_dir;
    std::string run_id;
    std::string histogram_out;
    std::uint64_t seed = 0;
    double lambda = 1.0;
    std::string metric;
    Eigen::Index samples = 50'000;
    std::vector<std::string> weights;
    std::vector<double> d_list;
    double d = 0.0;
    int repeats = 1;
    int n_knots = kDefaultKnotCount;
    int threads = 0;
    bool timing = false;
    double fit_floor = 0.375;
    std::string modes = "all";
    Eigen::Index top_k = 0;
    double variance_floor = 0.0;
    PhantomConfig phantom;
};

// Writes to --out, or stdout for "-".
class Output
{
public:
    explicit Output(const std::string& path)
    {
        if (path != "-") {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_)
                throw IoError("cannot write '" + path + "'");
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

ModePolicy mode_policy(const Options& o)
{
    if (o.modes == "all")
        return ModePolicy::all();
    if (o.modes == "top-k")
        return ModePolicy::top_k(o.top_k);
    if (o.modes == "variance-floor")
        return ModePolicy::variance_floor(o.variance_floor);
    throw std::invalid_argument("unknown mode policy '" + o.modes + "'");
}

std::string run_id_for(const Options& o)
{
    return o.run_id.empty() ? fs::path(o.manifest).parent_path().filename().string() : o.run_id;
}

struct Clouds
{
    ParameterCloud<double> training;
    ParameterCloud<double> samples;
};

Clouds model_clouds(const Options& o)
{
    const RegisteredSetD set = load_set(o.manifest);
    const TextureModelD model = o.model_dir.empty() ? build_model(set, mode_policy(o)) : load_model(o.model_dir);
    return {project_set(model, set), sample_model(model, o.samples, derive_seed(o.seed, 0x5a3b1e))};
}

std::vector<WeightKind> weight_kinds(const Options& o, std::vector<WeightKind> fallback)
{
    if (o.weights.empty())
        return fallback;
    std::vector<WeightKind> kinds;
    for (const auto& w : o.weights)
        kinds.push_back(parse_weight_kind(w));
    return kinds;
}

void cmd_synth(const Options& o)
{
    PhantomConfig cfg = o.phantom;
    cfg.seed = o.seed;
    const fs::path manifest = save_set(o.out_dir, make_phantom_set(cfg));
    std::cerr << "wrote " << manifest.string() << '\n';
}

void cmd_build_model(const Options& o)
{
    const TextureModelD model = build_model(load_set(o.manifest), mode_policy(o));
    save_model(o.out_dir, model);
    std::cerr << "model with " << model.mode_count() << " modes written to " << o.out_dir << '\n';
}

void cmd_specificity(const Options& o, bool swap)
{
    const Clouds c = model_clouds(o);
    const Metric metric = parse_metric(o.metric.empty() ? "l1" : o.metric);
    const auto r = swap ? generalization(c.training, c.samples, o.lambda, metric, false)
                        : specificity(c.training, c.samples, o.lambda, metric, false);
    if (!r.std_error_defined)
        std::cerr << "warning: standard error undefined for a single term; reported as 0\n";
    Output out(o.out);
    write_specificity_csv(out.stream(), run_id_for(o), r, c.samples.cols(), c.training.cols());
}

void cmd_voronoi(const Options& o)
{
    const Clouds c = model_clouds(o);
    Output out(o.out);
    write_histogram_csv(out.stream(), voronoi_histogram(c.training, c.samples,
                                                        parse_metric(o.metric.empty() ? "l1" : o.metric)));
}

void cmd_overlap(const Options& o)
{
    const RegisteredSetD set = load_set(o.manifest);
    if (!set.label_maps)
        throw std::invalid_argument("'" + o.manifest + "' lists no label maps");
    std::vector<OverlapResult> results;
    for (const WeightKind kind : weight_kinds(o, {WeightKind::volume_implicit}))
        results.push_back(generalized_overlap(*set.label_maps, label_weights(*set.label_maps, kind)));
    for (const auto& r : results)
        for (std::size_t l = 0; l < r.per_label_empty.size(); ++l)
            if (r.per_label_empty[l])
                std::cerr << "note: label '" << r.scheme.labels[l] << "' is empty in every map\n";
    Output out(o.out);
    write_overlap_csv(out.stream(), results);
}

void cmd_perturb(const Options& o)
{
    const RegisteredSetD set = load_set(o.manifest);
    std::vector<CpsWarp> warps;
    const RegisteredSetD perturbed = perturb_set(set, o.d, o.n_knots, o.seed, &warps);
    const fs::path manifest = save_set(o.out_dir, perturbed);
    fs::create_directories(fs::path(o.out_dir) / "warps");
    for (std::size_t i = 0; i < warps.size(); ++i)
        save_warp(fs::path(o.out_dir) / "warps" / (perturbed.names[i] + ".cps"), warps[i]);
    std::cerr << "wrote " << manifest.string() << '\n';
}

void cmd_sweep(const Options& o)
{
    const RegisteredSetD set = load_set(o.manifest);
    SweepConfig cfg;
    cfg.d_values = o.d_list;
    cfg.repeats = o.repeats;
    cfg.samples = o.samples;
    cfg.lambda = o.lambda;
    cfg.metric = parse_metric(o.metric.empty() ? "l2" : o.metric);
    cfg.seed = o.seed;
    cfg.weights = weight_kinds(o, {WeightKind::complexity}).front();
    cfg.n_knots = o.n_knots;
    validate(cfg);

    Output out(o.out);
    write_sweep_header(out.stream(), o.timing);
    const auto rows = run_validation_sweep(set, cfg, [&](const SweepRow& row) {
        write_sweep_row(out.stream(), row, o.timing);
        out.stream().flush();
    });

    std::vector<double> x, y, d;
    for (const auto& r : rows) {
        x.push_back(r.overlap);
        y.push_back(r.specificity);
        d.push_back(r.d);
    }
    try {
        const LineFit fit = fit_line(x, y, d, o.fit_floor);
        std::cerr << "fit (d >= " << o.fit_floor << ", " << fit.points << " rows): specificity = "
                  << fit.slope << " * overlap + " << fit.intercept << ", r = " << fit.correlation << '\n';
    } catch (const std::invalid_argument& e) {
        std::cerr << "no line fit: " << e.what() << '\n';
    }
}

EvaluationConfig evaluation_config(const Options& o)
{
    EvaluationConfig cfg;
    cfg.samples = o.samples;
    cfg.lambda = o.lambda;
    cfg.metric = parse_metric(o.metric.empty() ? "l1" : o.metric);
    cfg.seed = o.seed;
    cfg.weightings =
        weight_kinds(o, {WeightKind::inverse_volume, WeightKind::inverse_volume_complexity});
    cfg.policy = mode_policy(o);
    return cfg;
}

void cmd_evaluate(const Options& o)
{
    const EvaluationConfig cfg = evaluation_config(o);
    const EvaluationReport r = evaluate_registration(load_set(o.manifest), cfg);
    Output out(o.out);
    auto& s = out.stream();
    s << "measure,weighting,value,std_error\n";
    s << "specificity,," << format_number(r.specificity.value) << ',' << format_number(r.specificity.std_error)
      << '\n';
    s << "generalization,," << format_number(r.generalization.value) << ','
      << format_number(r.generalization.std_error) << '\n';
    for (std::size_t w = 0; w < r.overlaps.size(); ++w)
        s << "overlap," << to_string(cfg.weightings[w]) << ',' << format_number(r.overlaps[w].value) << ",\n";
    if (!o.histogram_out.empty()) {
        Output h(o.histogram_out);
        write_histogram_csv(h.stream(), r.voronoi);
    }
}

void cmd_rank(const Options& o)
{
    if (o.manifests.size() < 2)
        throw std::invalid_argument("rank needs at least 2 --manifest arguments");
    std::vector<RegisteredSetD> sets;
    std::vector<std::string> names;
    for (const auto& m : o.manifests) {
        sets.push_back(load_set(m));
        names.push_back(fs::path(m).parent_path().filename().string());
    }
    const EvaluationConfig cfg = evaluation_config(o);
    const RankingReport r = rank_registrations(sets, cfg);
    Output out(o.out);
    write_ranking_csv(out.stream(), names, r, cfg);
}

void add_model_flags(CLI::App* cmd, Options& o, const char* metric_default)
{
    cmd->add_option("--manifest", o.manifest, "Registered set manifest")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("--lambda", o.lambda, "Distance exponent")->check(CLI::PositiveNumber);
    cmd->add_option("--metric", o.metric, std::string("Parameter-space distance, l1 or l2 (default ") +
                                              metric_default + ")");
    cmd->add_option("--samples", o.samples, "Monte-Carlo sample count M")->check(CLI::Range(1, 100'000'000));
    cmd->add_option("--out", o.out, "Output CSV ('-' for stdout)");
    cmd->add_option("--modes", o.modes, "Mode policy: all, top-k or variance-floor");
    cmd->add_option("--top-k", o.top_k, "Modes kept by --modes top-k");
    cmd->add_option("--variance-floor", o.variance_floor, "Per-mode variance floor for --modes variance-floor");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Evaluate non-rigid registration by texture-model specificity and label overlap"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--threads", o.threads, "Worker threads (results do not depend on this)");

    std::function<void()> action;

    auto* synth = app.add_subcommand("synth", "Write a synthetic registered phantom set with label maps");
    synth->add_option("--out-dir", o.out_dir, "Output directory")->required();
    synth->add_option("--count", o.phantom.count, "Number of images");
    synth->add_option("--size", o.phantom.size, "Image width and height");
    synth->add_option("--labels", o.phantom.labels, "Number of labels (1-7)");
    synth->add_option("--noise", o.phantom.noise_sd, "Pixel noise standard deviation");
    synth->add_option("--seed", o.seed, "Random seed");
    synth->callback([&] { action = [&] { cmd_synth(o); }; });

    auto* build = app.add_subcommand("build-model", "Build and save the texture model of a registered set");
    build->add_option("--manifest", o.manifest, "Registered set manifest")->required()->check(CLI::ExistingFile);
    build->add_option("--out-dir", o.out_dir, "Model directory")->required();
    build->add_option("--modes", o.modes, "Mode policy: all, top-k or variance-floor");
    build->add_option("--top-k", o.top_k, "Modes kept by --modes top-k");
    build->add_option("--variance-floor", o.variance_floor, "Per-mode variance floor");
    build->callback([&] { action = [&] { cmd_build_model(o); }; });

    auto* spec = app.add_subcommand("specificity", "Monte-Carlo specificity of the texture model");
    add_model_flags(spec, o, "l1");
    spec->add_option("--model", o.model_dir, "Cached model directory (default: build from the set)");
    spec->add_option("--run-id", o.run_id, "Run identifier for the CSV row");
    spec->callback([&] { action = [&] { cmd_specificity(o, false); }; });

    auto* gen = app.add_subcommand("generalization", "Generalization (role-swapped specificity)");
    add_model_flags(gen, o, "l1");
    gen->add_option("--model", o.model_dir, "Cached model directory");
    gen->add_option("--run-id", o.run_id, "Run identifier for the CSV row");
    gen->callback([&] { action = [&] { cmd_specificity(o, true); }; });

    auto* vor = app.add_subcommand("voronoi-stats", "Sample populations of the training Voronoi cells");
    add_model_flags(vor, o, "l1");
    vor->add_option("--model", o.model_dir, "Cached model directory");
    vor->callback([&] { action = [&] { cmd_voronoi(o); }; });

    auto* ovl = app.add_subcommand("overlap", "Generalized Tanimoto overlap of the label maps");
    ovl->add_option("--manifest", o.manifest, "Registered set manifest")->required()->check(CLI::ExistingFile);
    ovl->add_option("--weights", o.weights, "volume, inverse, complexity or inverse-complexity (repeatable)");
    ovl->add_option("--out", o.out, "Output CSV ('-' for stdout)");
    ovl->callback([&] { action = [&] { cmd_overlap(o); }; });

    auto* pert = app.add_subcommand("perturb", "Warp every image with its own random CPS warp");
    pert->add_option("--manifest", o.manifest, "Registered set manifest")->required()->check(CLI::ExistingFile);
    pert->add_option("--d", o.d, "Target mean pixel displacement")->required()->check(CLI::NonNegativeNumber);
    pert->add_option("--n-knots", o.n_knots, "Knot grid size (clipped to the disk)");
    pert->add_option("--seed", o.seed, "Random seed");
    pert->add_option("--out-dir", o.out_dir, "Output directory for the perturbed set")->required();
    pert->callback([&] { action = [&] { cmd_perturb(o); }; });

    auto* sweep = app.add_subcommand("validate-sweep", "Specificity and overlap across perturbation sizes");
    add_model_flags(sweep, o, "l2");
    sweep->add_option("--d-list", o.d_list, "Mean displacements, comma separated")->required()->delimiter(',');
    sweep->add_option("--repeats", o.repeats, "Perturbation instances per d");
    sweep->add_option("--weights", o.weights, "Overlap weighting (default complexity)");
    sweep->add_option("--n-knots", o.n_knots, "Knot grid size");
    sweep->add_option("--fit-floor", o.fit_floor, "Smallest d used in the line fit");
    sweep->add_flag("--timing", o.timing, "Append a wall_seconds column (not reproducible)");
    sweep->callback([&] { action = [&] { cmd_sweep(o); }; });

    auto* eval = app.add_subcommand("evaluate", "Specificity, generalization and overlap report for one set");
    add_model_flags(eval, o, "l1");
    eval->add_option("--weights", o.weights, "Overlap weightings (default inverse, inverse-complexity)");
    eval->add_option("--histogram-out", o.histogram_out, "Also write the Voronoi histogram CSV");
    eval->callback([&] { action = [&] { cmd_evaluate(o); }; });

    auto* rank = app.add_subcommand("rank", "Rank registered sets by specificity and overlap");
    rank->add_option("--manifest", o.manifests, "Registered set manifests (2 or more)")
        ->required()
        ->check(CLI::ExistingFile);
    rank->add_option("--seed", o.seed, "Random seed");
    rank->add_option("--lambda", o.lambda, "Distance exponent")->check(CLI::PositiveNumber);
    rank->add_option("--metric", o.metric, "Parameter-space distance, l1 or l2 (default l1)");
    rank->add_option("--samples", o.samples, "Monte-Carlo sample count M")->check(CLI::Range(1, 100'000'000));
    rank->add_option("--weights", o.weights, "Overlap weightings (default inverse, inverse-complexity)");
    rank->add_option("--out", o.out, "Output CSV ('-' for stdout)");
    rank->callback([&] { action = [&] { cmd_rank(o); }; });

    CLI11_PARSE(app, argc, argv);

    try {
        set_thread_count(o.threads);
        action();
    } catch (const std::exception& e) {
        std::cerr << "nrreval: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
