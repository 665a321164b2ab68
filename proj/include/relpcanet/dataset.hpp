#ifndef RELPCANET_DATASET_HPP
#define RELPCANET_DATASET_HPP

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relpcanet/csv.hpp"
#include "relpcanet/errors.hpp"

namespace relpcanet::dataset {

enum class Direction { Positive, Negative };

struct Indicator {
    std::string name;
    Direction direction;
};

// Ordered indicator list; every indicator carries an explicit direction that
// selects the normalization orientation downstream.
struct IndicatorSchema {
    std::vector<Indicator> indicators;

    std::size_t size() const noexcept { return indicators.size(); }

    void check() const {
        if (indicators.size() < 2)
            throw Error(ErrorKind::InvalidInput, "schema needs at least 2 indicators");
        std::set<std::string> names;
        for (const auto& ind : indicators)
            if (!names.insert(ind.name).second)
                throw Error(ErrorKind::InvalidInput, "duplicate indicator name '" + ind.name + "'");
    }
};

// Schema file: JSON array of {"name": ..., "direction": "positive"|"negative"}.
inline IndicatorSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open schema file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, "schema '" + path + "': " + e.what());
    }
    if (!j.is_array())
        throw Error(ErrorKind::ParseError, "schema '" + path + "': expected a JSON array");
    IndicatorSchema schema;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        if (!e.is_object() || !e.contains("name") || !e.contains("direction"))
            throw Error(ErrorKind::ParseError, "schema '" + path + "': entry " + std::to_string(i) +
                                                   " needs {name, direction}");
        const std::string dir = e.at("direction").get<std::string>();
        Direction d;
        if (dir == "positive") d = Direction::Positive;
        else if (dir == "negative") d = Direction::Negative;
        else
            throw Error(ErrorKind::ParseError, "schema '" + path + "': entry " + std::to_string(i) +
                                                   " direction must be 'positive' or 'negative'");
        schema.indicators.push_back({e.at("name").get<std::string>(), d});
    }
    schema.check();
    return schema;
}

struct EntityRecord {
    std::string entity_id;
    std::string group;
    std::vector<std::optional<double>> values;  // missing = nullopt
};

struct Dataset {
    IndicatorSchema schema;
    std::vector<EntityRecord> records;
    std::string year_label;
};

// CSV contract: header `entity_id,group,<indicator names in schema order>`,
// one row per entity, empty cell = missing value.
inline Dataset load_dataset(const std::string& path, const IndicatorSchema& schema,
                            std::string year_label = "") {
    schema.check();
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open data file '" + path + "'");

    const std::size_t n = schema.size();
    auto fail = [&](std::size_t line, const std::string& what) -> Error {
        return Error(ErrorKind::ParseError, path + ":" + std::to_string(line) + ": " + what);
    };

    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw fail(1, "empty file, header row required");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = csv::split_line(line);
    if (header.size() != n + 2)
        throw fail(lineno, "header has " + std::to_string(header.size()) + " columns, expected " +
                               std::to_string(n + 2));
    if (header[0] != "entity_id" || header[1] != "group")
        throw fail(lineno, "header must start with entity_id,group");
    for (std::size_t j = 0; j < n; ++j)
        if (header[j + 2] != schema.indicators[j].name)
            throw fail(lineno, "header column " + std::to_string(j + 3) + " is '" + header[j + 2] +
                                   "', schema expects '" + schema.indicators[j].name + "'");

    Dataset ds;
    ds.schema = schema;
    ds.year_label = std::move(year_label);
    std::set<std::string> seen_ids;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;  // trailing newline
        const std::vector<std::string> cells = csv::split_line(line);
        if (cells.size() != n + 2)
            throw fail(lineno, "row has " + std::to_string(cells.size()) + " columns, expected " +
                                   std::to_string(n + 2));
        EntityRecord rec;
        rec.entity_id = cells[0];
        if (rec.entity_id.empty()) throw fail(lineno, "empty entity_id");
        if (!seen_ids.insert(rec.entity_id).second)
            throw fail(lineno, "duplicate entity_id '" + rec.entity_id + "'");
        rec.group = cells[1];
        rec.values.resize(n);
        for (std::size_t j = 0; j < n; ++j) {
            const std::string& cell = cells[j + 2];
            if (cell.empty()) continue;  // missing
            double v;
            if (!csv::parse_double(cell, v))
                throw fail(lineno, "column " + std::to_string(j + 3) + ": non-numeric cell '" +
                                       cell + "'");
            if (!std::isfinite(v))
                throw fail(lineno, "column " + std::to_string(j + 3) + ": non-finite value");
            rec.values[j] = v;
        }
        ds.records.push_back(std::move(rec));
    }
    if (ds.records.size() < 2)
        throw fail(lineno, "need at least 2 entity rows, got " + std::to_string(ds.records.size()));
    return ds;
}

// Replace each missing value by the mean of the present values for that
// indicator within the record's group. Never zero-fills; group means come
// from pre-imputation values only, so the operation is idempotent.
inline Dataset impute_missing(const Dataset& ds) {
    const std::size_t n = ds.schema.size();
    std::map<std::pair<std::string, std::size_t>, std::pair<double, std::size_t>> acc;
    for (const auto& rec : ds.records)
        for (std::size_t j = 0; j < n; ++j)
            if (rec.values[j]) {
                auto& [sum, count] = acc[{rec.group, j}];
                sum += *rec.values[j];
                count += 1;
            }

    Dataset out = ds;
    for (auto& rec : out.records)
        for (std::size_t j = 0; j < n; ++j) {
            if (rec.values[j]) continue;
            const auto it = acc.find({rec.group, j});
            if (it == acc.end())
                throw Error(ErrorKind::ImputationError,
                            "group '" + rec.group + "' has no present values for indicator '" +
                                ds.schema.indicators[j].name + "'");
            rec.values[j] = it->second.first / static_cast<double>(it->second.second);
        }
    return out;
}

}  // namespace relpcanet::dataset

#endif  // RELPCANET_DATASET_HPP
