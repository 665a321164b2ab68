// relpcanet: relative-PCA-attribute ranking pipeline CLI.
//
//   run               one year end to end, writes state.json + report CSVs
//   compare           year-over-year (and optional reference) comparison
//   validate-targets  check a target-matrix CSV for admissibility

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relpcanet/pipeline.hpp"

namespace {

int run_command(const std::string& data, const std::string& schema,
                const std::optional<std::string>& prev_state, const std::string& out_dir,
                const relpcanet::pipeline::RunConfig& cfg,
                const std::vector<std::string>& exclude) {
    using namespace relpcanet;
    pipeline::RunOutput run = pipeline::run_year(data, schema, prev_state, cfg);

    std::filesystem::create_directories(out_dir);
    pipeline::save_year_state(run.state, (std::filesystem::path(out_dir) / "state.json").string());
    ranknet::save_model(run.model, run.network,
                        (std::filesystem::path(out_dir) / "model.json").string());

    std::optional<pipeline::ComparisonReport> report;
    if (prev_state) {
        const pipeline::YearState prev = pipeline::load_year_state(*prev_state);
        report = pipeline::compare(run.state, prev);
    }
    pipeline::emit_reports(run, report ? &*report : nullptr, out_dir, exclude);

    std::cout << "year " << run.state.year_label << ": " << run.state.ranks.size()
              << " entities, " << run.state.cluster_state.cluster_count() << " clusters, "
              << (run.targets.mode == target::Mode::Dynamic ? "dynamic" : "static")
              << " targets, final loss "
              << csv::format_full(run.loss_history.empty() ? 0.0 : run.loss_history.back())
              << "\n";
    std::cout << "reports written to " << out_dir << "\n";
    return 0;
}

int compare_command(const std::string& current, const std::string& previous,
                    const std::optional<std::string>& reference, const std::string& out_dir) {
    using namespace relpcanet;
    const pipeline::YearState cur = pipeline::load_year_state(current);
    const pipeline::YearState prev = pipeline::load_year_state(previous);

    std::optional<std::vector<pipeline::ReferenceEntry>> ref;
    if (reference) ref = pipeline::load_reference(*reference);
    const pipeline::ComparisonReport report = pipeline::compare(cur, prev, ref ? &*ref : nullptr);

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path path = fs::path(out_dir) / "comparison.csv";
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
    pipeline::write_comparison_csv(&report, os);

    std::cout << "mean score change: " << csv::format_fixed2(report.mean_score_change) << "\n";
    if (report.mean_abs_rank_distance)
        std::cout << "mean |rank - reference rank|: "
                  << csv::format_fixed2(*report.mean_abs_rank_distance) << " over "
                  << report.reference_overlap << " entities\n";
    std::cout << "comparison written to " << path.string() << "\n";
    return 0;
}

int validate_targets_command(const std::string& targets_path) {
    using namespace relpcanet;
    const target::TargetMatrix tm = target::read_csv_file(targets_path);
    const std::vector<target::Violation> violations = target::validate(tm);
    if (violations.empty()) {
        std::cout << targets_path << ": valid "
                  << (tm.mode == target::Mode::Dynamic ? "dynamic" : "static") << " matrix, "
                  << tm.entity_ids.size() << " entities\n";
        return 0;
    }
    for (const auto& v : violations)
        std::cerr << targets_path << ": (" << tm.entity_ids[v.i] << ", " << tm.entity_ids[v.j]
                  << ") value " << csv::format_full(v.value) << ": " << v.reason << "\n";
    std::cerr << violations.size() << " violation(s)\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"REL-PCANet ranking pipeline"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run the pipeline for one year");
    std::string data, schema, out_dir;
    std::optional<std::string> prev_state;
    relpcanet::pipeline::RunConfig cfg;
    std::vector<std::string> exclude;
    run->add_option("--data", data, "entity indicator CSV")->required();
    run->add_option("--schema", schema, "indicator schema JSON")->required();
    run->add_option("--prev-state", prev_state, "previous year state.json (enables dynamic targets)");
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--clusters", cfg.clusters, "k-means cluster count")->capture_default_str();
    run->add_option("--restarts", cfg.restarts, "k-means restarts")->capture_default_str();
    run->add_option("--variance-target", cfg.variance_target, "PCA cumulative variance target")
        ->capture_default_str();
    run->add_option("--hidden", cfg.hidden, "hidden layer widths")
        ->delimiter(',')
        ->capture_default_str();
    run->add_option("--epochs", cfg.epochs, "max training epochs")->capture_default_str();
    run->add_option("--seed", cfg.seed, "base seed")->capture_default_str();
    run->add_option("--exclude", exclude, "entity ids excluded from reports (not from computation)")
        ->delimiter(',');
    run->add_option("--year", cfg.year_label, "year label (default: data file stem)");

    // compare
    auto* cmp = app.add_subcommand("compare", "compare two year states");
    std::string cur_path, prev_path, cmp_out;
    std::optional<std::string> reference;
    cmp->add_option("--current", cur_path, "current year state.json")->required();
    cmp->add_option("--previous", prev_path, "previous year state.json")->required();
    cmp->add_option("--reference", reference, "external reference ranking CSV");
    cmp->add_option("--out", cmp_out, "output directory")->required();

    // validate-targets
    auto* val = app.add_subcommand("validate-targets", "validate a target-matrix CSV");
    std::string targets_path;
    val->add_option("--targets", targets_path, "target matrix CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_command(data, schema, prev_state, out_dir, cfg, exclude);
        if (cmp->parsed()) return compare_command(cur_path, prev_path, reference, cmp_out);
        if (val->parsed()) return validate_targets_command(targets_path);
    } catch (const relpcanet::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == relpcanet::ErrorKind::NumericalFailure ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
