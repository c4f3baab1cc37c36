#pragma once

// JSON fixture format for tabular MDPs:
//   {"n_states": S, "n_actions": A,
//    "transition": [[[p(s'|s,a) for s'] for a] for s],
//    "reward": [[r(s,a) for a] for s],
//    "mu0": [mu0(s) for s],
//    "gamma": g}

#include "ompo/oracle/tabular.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace ompo::oracle {

inline nlohmann::json to_json(const TabularMDP& mdp) {
    nlohmann::json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    auto transition = nlohmann::json::array();
    auto reward = nlohmann::json::array();
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        auto per_action = nlohmann::json::array();
        auto r_row = nlohmann::json::array();
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            auto row = nlohmann::json::array();
            for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) row.push_back(mdp.T(s, a, s2));
            per_action.push_back(std::move(row));
            r_row.push_back(mdp.reward[mdp.sa(s, a)]);
        }
        transition.push_back(std::move(per_action));
        reward.push_back(std::move(r_row));
    }
    j["transition"] = std::move(transition);
    j["reward"] = std::move(reward);
    j["mu0"] = mdp.mu0;
    j["gamma"] = mdp.gamma;
    return j;
}

inline TabularMDP mdp_from_json(const nlohmann::json& j) {
    TabularMDP mdp;
    try {
        mdp.n_states = j.at("n_states").get<std::size_t>();
        mdp.n_actions = j.at("n_actions").get<std::size_t>();
        const auto& t = j.at("transition");
        const auto& r = j.at("reward");
        if (t.size() != mdp.n_states || r.size() != mdp.n_states)
            throw std::invalid_argument("MDP json: outer dimension does not match n_states");
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            if (t[s].size() != mdp.n_actions || r[s].size() != mdp.n_actions)
                throw std::invalid_argument("MDP json: action dimension does not match n_actions");
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                auto row = t[s][a].get<std::vector<double>>();
                if (row.size() != mdp.n_states) throw std::invalid_argument("MDP json: transition row has wrong length");
                mdp.transition.insert(mdp.transition.end(), row.begin(), row.end());
                mdp.reward.push_back(r[s][a].get<double>());
            }
        }
        mdp.mu0 = j.at("mu0").get<std::vector<double>>();
        mdp.gamma = j.at("gamma").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("MDP json: ") + e.what());
    }
    mdp.validate();
    return mdp;
}

inline void save_mdp(const TabularMDP& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json(mdp).dump(2) << '\n';
}

inline TabularMDP load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    return mdp_from_json(nlohmann::json::parse(in));
}

}  // namespace ompo::oracle
