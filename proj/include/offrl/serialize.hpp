// File formats: structured-text (JSON) documents for MDPs, scenarios, and
// reports; line-delimited datasets; CSV tables for experiment output.
#pragma once

#include "offrl/lowrank.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace offrl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

namespace detail {

/// transition tables nest as [s][a][s'], rewards as [s][a]
inline json nested_transition(const numvec& table, std::size_t S, std::size_t A) {
    json out = json::array();
    for (std::size_t s = 0; s < S; ++s) {
        json per_s = json::array();
        for (std::size_t a = 0; a < A; ++a) {
            json row = json::array();
            for (std::size_t sp = 0; sp < S; ++sp) row.push_back(table[(s * A + a) * S + sp]);
            per_s.push_back(std::move(row));
        }
        out.push_back(std::move(per_s));
    }
    return out;
}

inline numvec flat_transition(const json& j, std::size_t S, std::size_t A, const std::string& what) {
    require(j.is_array() && j.size() == S, what, ": expected ", S, " state entries");
    numvec table(S * A * S);
    for (std::size_t s = 0; s < S; ++s) {
        require(j[s].is_array() && j[s].size() == A, what, ": state ", s, " needs ", A, " action rows");
        for (std::size_t a = 0; a < A; ++a) {
            require(j[s][a].is_array() && j[s][a].size() == S, what, ": row (s=", s, ",a=", a,
                    ") needs ", S, " entries");
            for (std::size_t sp = 0; sp < S; ++sp) table[(s * A + a) * S + sp] = j[s][a][sp].get<prec_t>();
        }
    }
    return table;
}

inline json nested_reward(const numvec& reward, std::size_t S, std::size_t A) {
    json out = json::array();
    for (std::size_t s = 0; s < S; ++s) {
        json row = json::array();
        for (std::size_t a = 0; a < A; ++a) row.push_back(reward[s * A + a]);
        out.push_back(std::move(row));
    }
    return out;
}

inline numvec flat_reward(const json& j, std::size_t S, std::size_t A, const std::string& what) {
    require(j.is_array() && j.size() == S, what, ": expected ", S, " state entries");
    numvec reward(S * A);
    for (std::size_t s = 0; s < S; ++s) {
        require(j[s].is_array() && j[s].size() == A, what, ": state ", s, " needs ", A, " entries");
        for (std::size_t a = 0; a < A; ++a) reward[s * A + a] = j[s][a].get<prec_t>();
    }
    return reward;
}

} // namespace detail

inline json mdp_to_json(const TabularMDP& mdp) {
    return json{{"num_states", mdp.num_states},
                {"num_actions", mdp.num_actions},
                {"horizon", mdp.horizon},
                {"transition", detail::nested_transition(mdp.transition, mdp.num_states, mdp.num_actions)},
                {"reward", detail::nested_reward(mdp.reward, mdp.num_states, mdp.num_actions)},
                {"initial_dist", mdp.initial_dist}};
}

inline TabularMDP mdp_from_json(const json& j) {
    for (const char* key : {"num_states", "num_actions", "horizon", "transition", "reward", "initial_dist"})
        require(j.contains(key), "TabularMDP document: missing key \"", key, "\"");
    TabularMDP mdp;
    mdp.num_states = j["num_states"].get<std::size_t>();
    mdp.num_actions = j["num_actions"].get<std::size_t>();
    mdp.horizon = j["horizon"].get<std::size_t>();
    mdp.transition = detail::flat_transition(j["transition"], mdp.num_states, mdp.num_actions, "transition");
    mdp.reward = detail::flat_reward(j["reward"], mdp.num_states, mdp.num_actions, "reward");
    mdp.initial_dist = j["initial_dist"].get<numvec>();
    mdp.validate();
    return mdp;
}

/// Scenario document: the truth MDP's fields plus the model class and the
/// position of the truth inside it.
inline json scenario_to_json(const TabularMDP& truth, const FiniteModelClass& cls) {
    require(cls.num_states == truth.num_states && cls.num_actions == truth.num_actions,
            "scenario_to_json: class and MDP dimensions differ");
    json j = mdp_to_json(truth);
    json members = json::array();
    for (const numvec& m : cls.models)
        members.push_back(detail::nested_transition(m, cls.num_states, cls.num_actions));
    j["class"] = std::move(members);
    j["truth_index"] = cls.truth_index;
    return j;
}

inline std::pair<TabularMDP, FiniteModelClass> scenario_from_json(const json& j) {
    TabularMDP truth = mdp_from_json(j);
    require(j.contains("class") && j.contains("truth_index"),
            "scenario document: missing \"class\" or \"truth_index\"");
    FiniteModelClass cls{truth.num_states, truth.num_actions, {}, j["truth_index"].get<std::size_t>()};
    for (std::size_t i = 0; i < j["class"].size(); ++i)
        cls.models.push_back(detail::flat_transition(j["class"][i], cls.num_states, cls.num_actions,
                                                     msg("class member ", i)));
    cls.validate();
    return {std::move(truth), std::move(cls)};
}

inline json policy_to_json(const TimePolicy& policy) {
    json table = json::array();
    for (std::size_t h = 0; h < policy.horizon; ++h) {
        json per_h = json::array();
        for (std::size_t s = 0; s < policy.num_states; ++s) {
            json row = json::array();
            for (std::size_t a = 0; a < policy.num_actions; ++a) row.push_back(policy.pi(h, s, a));
            per_h.push_back(std::move(row));
        }
        table.push_back(std::move(per_h));
    }
    return json{{"horizon", policy.horizon},
                {"num_states", policy.num_states},
                {"num_actions", policy.num_actions},
                {"action_probs", std::move(table)}};
}

inline TimePolicy policy_from_json(const json& j) {
    for (const char* key : {"horizon", "num_states", "num_actions", "action_probs"})
        require(j.contains(key), "TimePolicy document: missing key \"", key, "\"");
    TimePolicy policy;
    policy.horizon = j["horizon"].get<std::size_t>();
    policy.num_states = j["num_states"].get<std::size_t>();
    policy.num_actions = j["num_actions"].get<std::size_t>();
    const json& table = j["action_probs"];
    require(table.is_array() && table.size() == policy.horizon, "TimePolicy document: expected ",
            policy.horizon, " step entries");
    policy.action_probs.resize(policy.horizon * policy.num_states * policy.num_actions);
    for (std::size_t h = 0; h < policy.horizon; ++h) {
        require(table[h].is_array() && table[h].size() == policy.num_states,
                "TimePolicy document: step ", h, " needs ", policy.num_states, " state rows");
        for (std::size_t s = 0; s < policy.num_states; ++s) {
            require(table[h][s].is_array() && table[h][s].size() == policy.num_actions,
                    "TimePolicy document: row (h=", h, ",s=", s, ") needs ", policy.num_actions,
                    " entries");
            for (std::size_t a = 0; a < policy.num_actions; ++a)
                policy.action_probs[policy.idx(h, s, a)] = table[h][s][a].get<prec_t>();
        }
    }
    policy.validate();
    return policy;
}

/// JSON has no infinity literal; unbounded coverage values serialize as the
/// strings "inf" / "-inf".
inline json json_real(prec_t x) {
    if (std::isinf(x)) return json(x > 0 ? "inf" : "-inf");
    return json(x);
}

/// Finite-embedded KNR document: W, the enumerated (s,a) -> feature table,
/// and the noise scale.
inline json knr_to_json(const Eigen::MatrixXd& w, const OneHotFeature& feature, prec_t zeta) {
    json wj = json::array();
    for (long i = 0; i < w.rows(); ++i) {
        json row = json::array();
        for (long c = 0; c < w.cols(); ++c) row.push_back(w(i, c));
        wj.push_back(std::move(row));
    }
    json table = json::array();
    for (std::size_t s = 0; s < feature.num_states; ++s)
        for (std::size_t a = 0; a < feature.num_actions; ++a) {
            const Eigen::VectorXd phi = feature(s, a);
            json row = json::array();
            for (long k = 0; k < phi.size(); ++k) row.push_back(phi(k));
            table.push_back(std::move(row));
        }
    return json{{"W", std::move(wj)},
                {"feature_table", std::move(table)},
                {"zeta", zeta},
                {"num_states", feature.num_states},
                {"num_actions", feature.num_actions}};
}

inline void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    require(out.good(), "write_json: cannot open ", path);
    out << j.dump(2) << "\n";
    require(out.good(), "write_json: write to ", path, " failed");
}

inline json read_json(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "read_json: cannot open ", path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        require(false, "read_json: ", path, ": ", e.what());
    }
    return j;
}

// ---------------------------------------------------------------------------
// Line-delimited datasets
// ---------------------------------------------------------------------------

/// Header line carries {n, seed, source}; each following line is one record
/// {"s": int, "a": int, "sp": int, "r": real}.
inline void write_dataset(const std::string& path, const OfflineDataset& data) {
    std::ofstream out(path);
    require(out.good(), "write_dataset: cannot open ", path);
    out << json{{"n", data.records.size()}, {"seed", data.seed}, {"source", data.source}}.dump() << "\n";
    for (const DataRecord& rec : data.records)
        out << json{{"s", rec.s}, {"a", rec.a}, {"sp", rec.sp}, {"r", rec.r}}.dump() << "\n";
    require(out.good(), "write_dataset: write to ", path, " failed");
}

inline OfflineDataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "read_dataset: cannot open ", path);
    std::string line;
    require(bool(std::getline(in, line)), "read_dataset: ", path, " is empty, header expected");
    json header = json::parse(line);
    for (const char* key : {"n", "seed", "source"})
        require(header.contains(key), "read_dataset: header missing \"", key, "\"");

    OfflineDataset data;
    data.seed = header["seed"].get<std::uint64_t>();
    data.source = header["source"].get<std::string>();
    const std::size_t n = header["n"].get<std::size_t>();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        require(!rec.is_discarded(), "read_dataset: ", path, " line ", line_no, " is not valid");
        for (const char* key : {"s", "a", "sp", "r"})
            require(rec.contains(key), "read_dataset: line ", line_no, " missing \"", key, "\"");
        data.records.push_back(DataRecord{rec["s"].get<std::size_t>(), rec["a"].get<std::size_t>(),
                                          rec["r"].get<prec_t>(), rec["sp"].get<std::size_t>()});
    }
    require(data.records.size() == n, "read_dataset: header claims n = ", n, " but ", path, " holds ",
            data.records.size(), " records");
    return data;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// Numeric CSV with a fixed header; doubles print round-trip exact.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns)
        : out_(path), columns_(columns.size()) {
        require(out_.good(), "CsvWriter: cannot open ", path);
        require(!columns.empty(), "CsvWriter: no columns");
        for (std::size_t i = 0; i < columns.size(); ++i)
            out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    }

    template <typename... Ts> void row(const Ts&... cells) {
        require(sizeof...(cells) == columns_, "CsvWriter: row has ", sizeof...(cells), " cells, header has ",
                columns_);
        std::size_t i = 0;
        ((out_ << cell_str(cells) << (++i < sizeof...(cells) ? "," : "\n")), ...);
    }

    void close() {
        out_.close();
        require(out_.good(), "CsvWriter: final write failed");
    }

private:
    static std::string cell_str(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }
    static std::string cell_str(bool v) { return v ? "1" : "0"; }
    static std::string cell_str(std::size_t v) { return std::to_string(v); }
    static std::string cell_str(long v) { return std::to_string(v); }
    static std::string cell_str(int v) { return std::to_string(v); }
    static std::string cell_str(const std::string& v) { return v; }

    std::ofstream out_;
    std::size_t columns_;
};

} // namespace offrl
