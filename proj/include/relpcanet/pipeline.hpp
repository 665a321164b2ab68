#ifndef RELPCANET_PIPELINE_HPP
#define RELPCANET_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relpcanet/csv.hpp"
#include "relpcanet/dataset.hpp"
#include "relpcanet/errors.hpp"
#include "relpcanet/ranknet.hpp"
#include "relpcanet/relarm.hpp"
#include "relpcanet/target.hpp"

namespace relpcanet::pipeline {

struct RunConfig {
    int clusters = 5;
    int restarts = 50;
    double variance_target = 0.95;
    std::vector<std::size_t> hidden{10, 10, 10};
    std::size_t epochs = 500;
    double loss_tolerance = 1e-7;
    std::uint64_t seed = 42;
    std::string year_label;  // defaults to the data file stem
};

// Everything a later year (or a report) needs from one pipeline run.
struct YearState {
    int version = 1;
    std::string year_label;
    relarm::ClusterState cluster_state;
    std::vector<double> scores_raw;
    std::vector<double> scores_scaled;  // in [1, 7]
    std::vector<int> ranks;             // 1 = best, aligned with entity ids
};

struct RunOutput {
    YearState state;
    target::TargetMatrix targets;
    std::vector<double> loss_history;
    ranknet::RankModel model;
    ranknet::NetworkConfig network;
};

// Linear map onto the 1..7 scale: min score -> 1, max -> 7.
inline std::vector<double> scale_scores(const std::vector<double>& raw) {
    if (raw.size() < 2)
        throw Error(ErrorKind::DegenerateScores, "need at least 2 scores to scale");
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    if (*lo_it == *hi_it)
        throw Error(ErrorKind::DegenerateScores, "all raw scores are equal; 1-7 scale undefined");
    const double lo = *lo_it, range = *hi_it - *lo_it;
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double ratio = (raw[i] - lo) / range;  // exactly 1 at the max, 0 at the min
        out[i] = 1.0 + 6.0 * ratio;
    }
    return out;
}

// Descending-score ranks, 1 = best; exact ties break on entity id.
inline std::vector<int> rank_scores(const std::vector<double>& scores,
                                    const std::vector<std::string>& entity_ids) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return entity_ids[a] < entity_ids[b];
    });
    std::vector<int> ranks(scores.size());
    for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = static_cast<int>(r) + 1;
    return ranks;
}

namespace detail {

inline nlohmann::json cluster_state_to_json(const relarm::ClusterState& cs) {
    nlohmann::json j;
    j["entity_ids"] = cs.entity_ids;
    j["labels"] = cs.labels;
    j["centers"] = {{"rows", cs.centers.rows()}, {"cols", cs.centers.cols()},
                    {"data", cs.centers.data()}};
    j["projections"] = cs.projections;
    j["cluster_order"] = cs.cluster_order;
    j["entity_projection"] = cs.entity_projection;
    j["within_cluster_rank"] = cs.within_cluster_rank;
    return j;
}

inline relarm::ClusterState cluster_state_from_json(const nlohmann::json& j) {
    relarm::ClusterState cs;
    cs.entity_ids = j.at("entity_ids").get<std::vector<std::string>>();
    cs.labels = j.at("labels").get<std::vector<int>>();
    const auto& jc = j.at("centers");
    cs.centers = Matrix(jc.at("rows").get<std::size_t>(), jc.at("cols").get<std::size_t>());
    cs.centers.data() = jc.at("data").get<std::vector<double>>();
    if (cs.centers.data().size() != cs.centers.rows() * cs.centers.cols())
        throw Error(ErrorKind::ParseError, "cluster centers size mismatch");
    cs.projections = j.at("projections").get<std::vector<double>>();
    cs.cluster_order = j.at("cluster_order").get<std::vector<int>>();
    cs.entity_projection = j.at("entity_projection").get<std::vector<double>>();
    cs.within_cluster_rank = j.at("within_cluster_rank").get<std::vector<int>>();
    return cs;
}

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string(name) + ": " + e.message());
    }
}

}  // namespace detail

inline void save_year_state(const YearState& ys, const std::string& path) {
    nlohmann::json j;
    j["version"] = ys.version;
    j["year_label"] = ys.year_label;
    j["cluster_state"] = detail::cluster_state_to_json(ys.cluster_state);
    j["scores_raw"] = ys.scores_raw;
    j["scores_scaled"] = ys.scores_scaled;
    j["ranks"] = ys.ranks;
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
    if (!os) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

inline YearState load_year_state(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open state file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, "state '" + path + "': " + e.what());
    }
    YearState ys;
    try {
        ys.version = j.at("version").get<int>();
        if (ys.version != 1)
            throw Error(ErrorKind::ParseError,
                        "state '" + path + "': unsupported version " + std::to_string(ys.version));
        ys.year_label = j.at("year_label").get<std::string>();
        ys.cluster_state = detail::cluster_state_from_json(j.at("cluster_state"));
        ys.scores_raw = j.at("scores_raw").get<std::vector<double>>();
        ys.scores_scaled = j.at("scores_scaled").get<std::vector<double>>();
        ys.ranks = j.at("ranks").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, "state '" + path + "': " + e.what());
    }
    return ys;
}

// One full year: load -> impute -> normalize -> PCA -> feature map ->
// clustering -> targets (static without a previous state, dynamic with one)
// -> training -> scoring -> 1..7 scaling -> ranks.
inline RunOutput run_year(const std::string& data_path, const std::string& schema_path,
                          const std::optional<std::string>& prev_state_path, const RunConfig& cfg) {
    const dataset::IndicatorSchema schema =
        detail::stage("load-schema", [&] { return dataset::load_schema(schema_path); });
    std::string year = cfg.year_label.empty()
                           ? std::filesystem::path(data_path).stem().string()
                           : cfg.year_label;
    dataset::Dataset ds = detail::stage(
        "load-dataset", [&] { return dataset::load_dataset(data_path, schema, year); });
    ds = detail::stage("impute", [&] { return dataset::impute_missing(ds); });
    const relarm::NormalizedMatrix b = detail::stage("normalize", [&] { return relarm::normalize(ds); });
    const relarm::PcaBasis basis =
        detail::stage("fit-pca", [&] { return relarm::fit_pca(b, cfg.variance_target); });
    const relarm::FeatureSet features =
        detail::stage("feature-map", [&] { return relarm::feature_map(b, basis); });
    const RandomSource rng(cfg.seed);
    const relarm::ClusterState cs = detail::stage("cluster", [&] {
        return relarm::cluster_entities(features, basis, cfg.clusters, cfg.restarts, rng.spawn(0));
    });

    std::optional<YearState> prev;
    if (prev_state_path)
        prev = detail::stage("load-prev-state", [&] { return load_year_state(*prev_state_path); });

    target::TargetMatrix targets = detail::stage("targets", [&] {
        return prev ? target::build_dynamic(cs, prev->cluster_state) : target::build_static(cs);
    });

    ranknet::NetworkConfig net;
    net.input_dim = features.vectors.cols();
    net.hidden_layers = cfg.hidden;
    net.seed = derive_seed(cfg.seed, 1);
    net.epochs = cfg.epochs;
    net.loss_tolerance = cfg.loss_tolerance;

    ranknet::TrainResult trained = detail::stage("train", [&] {
        return ranknet::train(ranknet::init_model(net), features, targets, net);
    });
    const std::vector<double> raw =
        detail::stage("score", [&] { return ranknet::score_all(trained.model, features); });
    const std::vector<double> scaled = detail::stage("scale", [&] { return scale_scores(raw); });

    RunOutput out;
    out.state.year_label = year;
    out.state.cluster_state = cs;
    out.state.scores_raw = raw;
    out.state.scores_scaled = scaled;
    out.state.ranks = rank_scores(scaled, features.entity_ids);
    out.targets = std::move(targets);
    out.loss_history = std::move(trained.loss_history);
    out.model = std::move(trained.model);
    out.network = net;
    return out;
}

struct EntityDelta {
    std::string entity_id;
    int prev_rank = 0;
    int cur_rank = 0;
    int rank_delta = 0;  // previous - current; positive = moved up
    double prev_score = 0.0;
    double cur_score = 0.0;
    double score_delta = 0.0;  // current - previous on the 1..7 scale
};

struct ComparisonReport {
    std::vector<EntityDelta> entries;  // ordered by current rank
    double mean_score_change = 0.0;
    std::optional<double> mean_abs_rank_distance;      // vs reference ranking
    std::optional<double> mean_abs_score_difference;   // vs reference scores, re-anchored
    std::size_t reference_overlap = 0;
};

struct ReferenceEntry {
    std::string entity_id;
    int rank = 0;
    std::optional<double> score;
};

// Reference ranking CSV: header `entity_id,rank[,score]`.
inline std::vector<ReferenceEntry> load_reference(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open reference file '" + path + "'");
    auto fail = [&](std::size_t line, const std::string& what) -> Error {
        return Error(ErrorKind::ParseError, path + ":" + std::to_string(line) + ": " + what);
    };
    std::string line;
    if (!std::getline(in, line)) throw fail(1, "empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = csv::split_line(line);
    const bool has_score = header.size() == 3 && header[2] == "score";
    if (!(header.size() == 2 || has_score) || header[0] != "entity_id" || header[1] != "rank")
        throw fail(1, "header must be entity_id,rank or entity_id,rank,score");

    std::vector<ReferenceEntry> out;
    std::set<std::string> seen;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = csv::split_line(line);
        if (cells.size() != header.size())
            throw fail(lineno, "column count mismatch");
        ReferenceEntry e;
        e.entity_id = cells[0];
        if (!seen.insert(e.entity_id).second)
            throw fail(lineno, "duplicate entity_id '" + e.entity_id + "'");
        double r;
        if (!csv::parse_double(cells[1], r) || r != std::floor(r) || r < 1)
            throw fail(lineno, "rank must be a positive integer, got '" + cells[1] + "'");
        e.rank = static_cast<int>(r);
        if (has_score && !cells[2].empty()) {
            double s;
            if (!csv::parse_double(cells[2], s)) throw fail(lineno, "non-numeric score");
            e.score = s;
        }
        out.push_back(std::move(e));
    }
    if (out.empty()) throw fail(lineno, "reference has no rows");
    return out;
}

// Year-over-year deltas plus optional distance to an external reference
// ranking. The reference may cover a subset of the entities (externally
// unranked entities are simply skipped); score comparison re-anchors the
// current 1..7 scores onto the reference score range.
inline ComparisonReport compare(const YearState& current, const YearState& previous,
                                const std::vector<ReferenceEntry>* reference = nullptr) {
    const auto& ids = current.cluster_state.entity_ids;
    std::map<std::string, std::size_t> prev_index;
    for (std::size_t i = 0; i < previous.cluster_state.entity_ids.size(); ++i)
        prev_index[previous.cluster_state.entity_ids[i]] = i;
    if (prev_index.size() != ids.size())
        throw Error(ErrorKind::InvalidInput, "entity sets differ between the two states");

    ComparisonReport rep;
    double score_sum = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto it = prev_index.find(ids[i]);
        if (it == prev_index.end())
            throw Error(ErrorKind::InvalidInput, "entity '" + ids[i] + "' missing from previous state");
        const std::size_t pi = it->second;
        EntityDelta d;
        d.entity_id = ids[i];
        d.prev_rank = previous.ranks[pi];
        d.cur_rank = current.ranks[i];
        d.rank_delta = d.prev_rank - d.cur_rank;
        d.prev_score = previous.scores_scaled[pi];
        d.cur_score = current.scores_scaled[i];
        d.score_delta = d.cur_score - d.prev_score;
        score_sum += d.score_delta;
        rep.entries.push_back(std::move(d));
    }
    std::sort(rep.entries.begin(), rep.entries.end(),
              [](const EntityDelta& a, const EntityDelta& b) { return a.cur_rank < b.cur_rank; });
    rep.mean_score_change = score_sum / static_cast<double>(rep.entries.size());

    if (reference) {
        std::map<std::string, const ReferenceEntry*> ref;
        for (const auto& e : *reference) ref[e.entity_id] = &e;
        double rank_dist = 0.0;
        std::size_t overlap = 0;
        double ref_lo = 0.0, ref_hi = 0.0;
        bool scores_ok = true, first_score = true;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto it = ref.find(ids[i]);
            if (it == ref.end()) continue;
            ++overlap;
            rank_dist += std::abs(current.ranks[i] - it->second->rank);
            if (!it->second->score) {
                scores_ok = false;
            } else if (first_score) {
                ref_lo = ref_hi = *it->second->score;
                first_score = false;
            } else {
                ref_lo = std::min(ref_lo, *it->second->score);
                ref_hi = std::max(ref_hi, *it->second->score);
            }
        }
        if (overlap == 0)
            throw Error(ErrorKind::InvalidInput, "reference shares no entities with the current state");
        rep.reference_overlap = overlap;
        rep.mean_abs_rank_distance = rank_dist / static_cast<double>(overlap);

        if (scores_ok && ref_hi > ref_lo) {
            // re-anchor current scaled scores onto the reference min/max
            double cur_lo = 0.0, cur_hi = 0.0;
            bool first = true;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                if (!ref.count(ids[i])) continue;
                const double s = current.scores_scaled[i];
                if (first) {
                    cur_lo = cur_hi = s;
                    first = false;
                } else {
                    cur_lo = std::min(cur_lo, s);
                    cur_hi = std::max(cur_hi, s);
                }
            }
            if (cur_hi > cur_lo) {
                double diff_sum = 0.0;
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    const auto it = ref.find(ids[i]);
                    if (it == ref.end()) continue;
                    const double anchored =
                        ref_lo + (ref_hi - ref_lo) * (current.scores_scaled[i] - cur_lo) /
                                     (cur_hi - cur_lo);
                    diff_sum += std::abs(anchored - *it->second->score);
                }
                rep.mean_abs_score_difference = diff_sum / static_cast<double>(overlap);
            }
        }
    }
    return rep;
}

namespace detail {

inline std::ofstream open_report(const std::filesystem::path& dir, const char* name) {
    const std::filesystem::path p = dir / name;
    std::ofstream os(p);
    if (!os) throw Error(ErrorKind::Io, "cannot open '" + p.string() + "' for writing");
    return os;
}

}  // namespace detail

inline const char* direction_marker(int rank_delta) {
    return rank_delta > 0 ? "up" : (rank_delta < 0 ? "down" : "same");
}

// Per-entity rows ordered by current rank, then AVERAGE and reference
// summary rows. Excluded ids are dropped from the rows, not the averages.
inline void write_comparison_csv(const ComparisonReport* report, std::ostream& os,
                                 const std::set<std::string>& excluded = {}) {
    os << "entity_id,rank_previous,rank_current,rank_delta,direction,"
          "score_previous,score_current,score_delta,score_delta_display\n";
    if (!report) return;
    for (const auto& d : report->entries) {
        if (excluded.count(d.entity_id)) continue;
        os << csv::join_line({d.entity_id, std::to_string(d.prev_rank), std::to_string(d.cur_rank),
                              std::to_string(d.rank_delta), direction_marker(d.rank_delta),
                              csv::format_full(d.prev_score), csv::format_full(d.cur_score),
                              csv::format_full(d.score_delta), csv::format_fixed2(d.score_delta)})
           << "\n";
    }
    os << csv::join_line({"AVERAGE", "", "", "", "", "", "",
                          csv::format_full(report->mean_score_change),
                          csv::format_fixed2(report->mean_score_change)})
       << "\n";
    if (report->mean_abs_rank_distance)
        os << csv::join_line({"REFERENCE_RANK_DISTANCE", "", "", "", "", "", "",
                              csv::format_full(*report->mean_abs_rank_distance),
                              csv::format_fixed2(*report->mean_abs_rank_distance)})
           << "\n";
    if (report->mean_abs_score_difference)
        os << csv::join_line({"REFERENCE_SCORE_DIFFERENCE", "", "", "", "", "", "",
                              csv::format_full(*report->mean_abs_score_difference),
                              csv::format_fixed2(*report->mean_abs_score_difference)})
           << "\n";
}

// Writes scores.csv, ranking.csv, targets.csv, loss_history.csv and
// comparison.csv under out_dir. Excluded entity ids are dropped from report
// rows only; every number was computed with them included.
inline void emit_reports(const RunOutput& run, const ComparisonReport* report,
                         const std::string& out_dir,
                         const std::vector<std::string>& exclude = {}) {
    namespace fs = std::filesystem;
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir))
        throw Error(ErrorKind::Io, "output directory '" + out_dir + "' is not writable");
    const std::set<std::string> excluded(exclude.begin(), exclude.end());

    const YearState& st = run.state;
    const auto& ids = st.cluster_state.entity_ids;
    {
        auto os = detail::open_report(dir, "scores.csv");
        os << "entity_id,score_raw,score_scaled,score_display\n";
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (excluded.count(ids[i])) continue;
            os << csv::join_line({ids[i], csv::format_full(st.scores_raw[i]),
                                  csv::format_full(st.scores_scaled[i]),
                                  csv::format_fixed2(st.scores_scaled[i])})
               << "\n";
        }
        if (!os) throw Error(ErrorKind::Io, "write failed for scores.csv in '" + out_dir + "'");
    }
    {
        auto os = detail::open_report(dir, "ranking.csv");
        os << "rank,entity_id,score_scaled,score_display\n";
        std::vector<std::size_t> order(ids.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return st.ranks[a] < st.ranks[b]; });
        for (const std::size_t i : order) {
            if (excluded.count(ids[i])) continue;
            os << csv::join_line({std::to_string(st.ranks[i]), ids[i],
                                  csv::format_full(st.scores_scaled[i]),
                                  csv::format_fixed2(st.scores_scaled[i])})
               << "\n";
        }
        if (!os) throw Error(ErrorKind::Io, "write failed for ranking.csv in '" + out_dir + "'");
    }
    {
        auto os = detail::open_report(dir, "targets.csv");
        target::write_csv(run.targets, os);
        if (!os) throw Error(ErrorKind::Io, "write failed for targets.csv in '" + out_dir + "'");
    }
    {
        auto os = detail::open_report(dir, "loss_history.csv");
        os << "epoch,mean_loss\n";
        for (std::size_t e = 0; e < run.loss_history.size(); ++e)
            os << e << "," << csv::format_full(run.loss_history[e]) << "\n";
        if (!os) throw Error(ErrorKind::Io, "write failed for loss_history.csv in '" + out_dir + "'");
    }
    {
        auto os = detail::open_report(dir, "comparison.csv");
        write_comparison_csv(report, os, excluded);
        if (!os) throw Error(ErrorKind::Io, "write failed for comparison.csv in '" + out_dir + "'");
    }
}

}  // namespace relpcanet::pipeline

#endif  // RELPCANET_PIPELINE_HPP
