#ifndef RELPCANET_TARGET_HPP
#define RELPCANET_TARGET_HPP

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "relpcanet/csv.hpp"
#include "relpcanet/errors.hpp"
#include "relpcanet/matrix.hpp"
#include "relpcanet/relarm.hpp"

namespace relpcanet::target {

enum class Mode { Static, Dynamic };

// Pairwise target probabilities t_ij: probability that entity i outranks
// entity j. Off-diagonal values come from a fixed admissible set (8 values
// in static mode, 9 with the 0.5 of the dynamic rules); t_ii = 0.5 by
// convention and is excluded from training pairs.
struct TargetMatrix {
    std::vector<std::string> entity_ids;
    Matrix t;  // M x M
    Mode mode = Mode::Static;
};

inline constexpr std::array<double, 8> kStaticValues = {0.0, 0.35, 0.4, 0.45, 0.55, 0.6, 0.65, 1.0};
inline constexpr std::array<double, 9> kDynamicValues = {0.0,  0.35, 0.4,  0.45, 0.5,
                                                         0.55, 0.6,  0.65, 1.0};

// Complement lookup keeps every entry inside the admissible set; computing
// 1.0 - 0.55 in floating point would land outside it.
inline double complement_of(double v) {
    if (v == 0.0) return 1.0;
    if (v == 0.35) return 0.65;
    if (v == 0.4) return 0.6;
    if (v == 0.45) return 0.55;
    if (v == 0.5) return 0.5;
    if (v == 0.55) return 0.45;
    if (v == 0.6) return 0.4;
    if (v == 0.65) return 0.35;
    if (v == 1.0) return 0.0;
    throw Error(ErrorKind::InvalidInput, "no complement for non-admissible value");
}

namespace detail {

// Within-cluster ladder for rank gap delta = r_j - r_i (rank 1 = best).
inline double static_within(int delta) {
    if (delta >= 3) return 0.65;
    if (delta == 2) return 0.6;
    if (delta == 1) return 0.55;
    if (delta == -1) return 0.45;
    if (delta == -2) return 0.4;
    return 0.35;  // delta <= -3
}

// Strict "i has higher projection than j" order; exact projection ties break
// on entity id so construction stays deterministic.
inline bool precedes(const relarm::ClusterState& cs, std::size_t i, std::size_t j) {
    if (cs.entity_projection[i] != cs.entity_projection[j])
        return cs.entity_projection[i] > cs.entity_projection[j];
    return cs.entity_ids[i] < cs.entity_ids[j];
}

inline void check_complete(const relarm::ClusterState& cs, const char* which) {
    if (!cs.complete())
        throw Error(ErrorKind::InvalidInput,
                    std::string(which) + " cluster state is incomplete (missing labels, "
                                         "projections or ranks)");
}

}  // namespace detail

// First-year rules: cross-cluster pairs resolve to 1/0 by cluster projection
// rank; same-cluster pairs use the within-cluster rank-gap ladder.
inline TargetMatrix build_static(const relarm::ClusterState& cs) {
    detail::check_complete(cs, "input");
    const std::size_t m = cs.entity_ids.size();
    TargetMatrix tm;
    tm.entity_ids = cs.entity_ids;
    tm.mode = Mode::Static;
    tm.t = Matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) tm.t(i, i) = 0.5;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double tij;
            if (cs.labels[i] != cs.labels[j]) {
                tij = cs.cluster_rank(cs.labels[i]) < cs.cluster_rank(cs.labels[j]) ? 1.0 : 0.0;
            } else {
                tij = detail::static_within(cs.within_cluster_rank[j] - cs.within_cluster_rank[i]);
            }
            tm.t(i, j) = tij;
            tm.t(j, i) = complement_of(tij);
        }
    }
    return tm;
}

namespace detail {

// sign(previous cluster rank - current cluster rank): +1 upgraded, -1
// downgraded, 0 stayed (movement between equally ranked clusters counts as
// staying).
inline std::vector<int> movements(const relarm::ClusterState& current,
                                  const relarm::ClusterState& previous) {
    std::map<std::string, std::size_t> prev_index;
    for (std::size_t i = 0; i < previous.entity_ids.size(); ++i)
        prev_index[previous.entity_ids[i]] = i;

    std::vector<std::string> only_current, only_previous;
    for (const auto& id : current.entity_ids)
        if (!prev_index.count(id)) only_current.push_back(id);
    if (!only_current.empty() || prev_index.size() != current.entity_ids.size()) {
        std::map<std::string, bool> cur_ids;
        for (const auto& id : current.entity_ids) cur_ids[id] = true;
        for (const auto& [id, idx] : prev_index)
            if (!cur_ids.count(id)) only_previous.push_back(id);
        std::ostringstream msg;
        msg << "entity sets differ between years;";
        if (!only_current.empty()) {
            msg << " only in current:";
            for (const auto& id : only_current) msg << " " << id;
            msg << ";";
        }
        if (!only_previous.empty()) {
            msg << " only in previous:";
            for (const auto& id : only_previous) msg << " " << id;
        }
        throw Error(ErrorKind::InvalidInput, msg.str());
    }

    std::vector<int> mv(current.entity_ids.size(), 0);
    for (std::size_t i = 0; i < current.entity_ids.size(); ++i) {
        const std::size_t pi = prev_index.at(current.entity_ids[i]);
        const int prev_rank = previous.cluster_rank(previous.labels[pi]);
        const int cur_rank = current.cluster_rank(current.labels[i]);
        mv[i] = prev_rank > cur_rank ? 1 : (prev_rank < cur_rank ? -1 : 0);
    }
    return mv;
}

// Same-current-cluster value for the ordered pair (i, j) given the movement
// pattern. Only called with at least one mover.
inline double dynamic_within(const relarm::ClusterState& cs, std::size_t i, std::size_t j, int mi,
                             int mj) {
    const bool i_higher = precedes(cs, i, j);
    if (mi == 0 && mj < 0) return i_higher ? 0.65 : 0.5;   // j downgraded in
    if (mi == 0 && mj > 0) return i_higher ? 0.5 : 0.35;   // j upgraded in
    if (mi < 0 && mj == 0) return i_higher ? 0.5 : 0.35;   // mirror of the first case
    if (mi > 0 && mj == 0) return i_higher ? 0.65 : 0.5;   // mirror of the second case
    if ((mi < 0 && mj < 0) || (mi > 0 && mj > 0)) return 0.5;  // both moved the same way
    if (mi < 0 && mj > 0) return i_higher ? 0.5 : 0.65;    // i down, j up, as printed
    return i_higher ? 0.35 : 0.5;                          // i up, j down, mirrored
}

}  // namespace detail

// Second-year rules: cross-cluster pairs still resolve by current cluster
// rank; same-cluster pairs consult each entity's movement since the previous
// year. With no movement at all this reduces exactly to build_static.
inline TargetMatrix build_dynamic(const relarm::ClusterState& current,
                                  const relarm::ClusterState& previous) {
    detail::check_complete(current, "current");
    detail::check_complete(previous, "previous");
    const std::vector<int> mv = detail::movements(current, previous);

    const std::size_t m = current.entity_ids.size();
    TargetMatrix tm;
    tm.entity_ids = current.entity_ids;
    tm.mode = Mode::Dynamic;
    tm.t = Matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) tm.t(i, i) = 0.5;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double tij;
            if (current.labels[i] != current.labels[j]) {
                tij = current.cluster_rank(current.labels[i]) <
                              current.cluster_rank(current.labels[j])
                          ? 1.0
                          : 0.0;
            } else if (mv[i] == 0 && mv[j] == 0) {
                tij = detail::static_within(current.within_cluster_rank[j] -
                                            current.within_cluster_rank[i]);
            } else {
                tij = detail::dynamic_within(current, i, j, mv[i], mv[j]);
            }
            tm.t(i, j) = tij;
            tm.t(j, i) = complement_of(tij);
        }
    }
    return tm;
}

struct Violation {
    std::size_t i = 0;
    std::size_t j = 0;
    double value = 0.0;
    std::string reason;
};

// Reports admissible-set membership, diagonal and complementarity breaches.
inline std::vector<Violation> validate(const TargetMatrix& tm) {
    std::vector<Violation> out;
    const std::size_t m = tm.t.rows();
    if (tm.t.cols() != m || tm.entity_ids.size() != m) {
        out.push_back({0, 0, 0.0, "matrix is not square or ids misaligned"});
        return out;
    }
    const bool dynamic = tm.mode == Mode::Dynamic;
    auto admissible = [&](double v) {
        if (dynamic)
            return std::find(kDynamicValues.begin(), kDynamicValues.end(), v) != kDynamicValues.end();
        return std::find(kStaticValues.begin(), kStaticValues.end(), v) != kStaticValues.end();
    };
    for (std::size_t i = 0; i < m; ++i) {
        if (tm.t(i, i) != 0.5)
            out.push_back({i, i, tm.t(i, i), "diagonal entry must be 0.5"});
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            const double v = tm.t(i, j);
            if (!admissible(v))
                out.push_back({i, j, v,
                               std::string("value outside the ") + (dynamic ? "9" : "8") +
                                   "-value " + (dynamic ? "dynamic" : "static") + " set"});
            if (i < j && tm.t(i, j) + tm.t(j, i) != 1.0)
                out.push_back({i, j, v, "complementarity t_ij + t_ji != 1"});
        }
    }
    return out;
}

// Exact decimal rendering of the admissible values for the audit CSV.
inline std::string render_value(double v) {
    if (v == 0.0) return "0";
    if (v == 0.35) return "0.35";
    if (v == 0.4) return "0.4";
    if (v == 0.45) return "0.45";
    if (v == 0.5) return "0.5";
    if (v == 0.55) return "0.55";
    if (v == 0.6) return "0.6";
    if (v == 0.65) return "0.65";
    if (v == 1.0) return "1";
    return csv::format_full(v);
}

inline void write_csv(const TargetMatrix& tm, std::ostream& os) {
    std::vector<std::string> header{"entity_id"};
    header.insert(header.end(), tm.entity_ids.begin(), tm.entity_ids.end());
    os << csv::join_line(header) << "\n";
    for (std::size_t i = 0; i < tm.t.rows(); ++i) {
        std::vector<std::string> row{tm.entity_ids[i]};
        for (std::size_t j = 0; j < tm.t.cols(); ++j) row.push_back(render_value(tm.t(i, j)));
        os << csv::join_line(row) << "\n";
    }
}

inline void write_csv_file(const TargetMatrix& tm, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
    write_csv(tm, os);
    if (!os) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

// Reads a matrix written by write_csv. Mode is inferred: any off-diagonal
// 0.5 means the dynamic value set, otherwise static.
inline TargetMatrix read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open targets file '" + path + "'");
    auto fail = [&](std::size_t line, const std::string& what) -> Error {
        return Error(ErrorKind::ParseError, path + ":" + std::to_string(line) + ": " + what);
    };
    std::string line;
    if (!std::getline(in, line)) throw fail(1, "empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = csv::split_line(line);
    if (header.size() < 2 || header[0] != "entity_id")
        throw fail(1, "header must be entity_id,<entity ids>");

    TargetMatrix tm;
    tm.entity_ids.assign(header.begin() + 1, header.end());
    const std::size_t m = tm.entity_ids.size();
    tm.t = Matrix(m, m);
    std::size_t lineno = 1, row = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (row >= m) throw fail(lineno, "more rows than entity ids");
        const std::vector<std::string> cells = csv::split_line(line);
        if (cells.size() != m + 1)
            throw fail(lineno, "row has " + std::to_string(cells.size()) + " columns, expected " +
                                   std::to_string(m + 1));
        if (cells[0] != tm.entity_ids[row])
            throw fail(lineno, "row label '" + cells[0] + "' does not match header order");
        for (std::size_t j = 0; j < m; ++j) {
            double v;
            if (!csv::parse_double(cells[j + 1], v))
                throw fail(lineno, "non-numeric cell '" + cells[j + 1] + "'");
            tm.t(row, j) = v;
        }
        ++row;
    }
    if (row != m) throw fail(lineno, "expected " + std::to_string(m) + " rows, got " + std::to_string(row));

    tm.mode = Mode::Static;
    for (std::size_t i = 0; i < m && tm.mode == Mode::Static; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (i != j && tm.t(i, j) == 0.5) {
                tm.mode = Mode::Dynamic;
                break;
            }
    return tm;
}

}  // namespace relpcanet::target

#endif  // RELPCANET_TARGET_HPP
