#include "chainstate/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "chainstate/error.hpp"
#include "chainstate/strings.hpp"

namespace chainstate::eval {

namespace {

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pad(std::string s, std::size_t width, bool right = false) {
    if (s.size() >= width) return s;
    return right ? std::string(width - s.size(), ' ') + s : s + std::string(width - s.size(), ' ');
}

}  // namespace

StateAccuracy state_accuracy(const std::vector<agent::StepRecord>& records, const AgentVariant& variant) {
    if (!variant.include_state) throw Error(ErrorKind::NoStateVariant, variant.display_name());
    if (records.empty()) throw Error(ErrorKind::EmptyInput, "no step records");
    auto keys = state_keys(variant);

    StateAccuracy acc;
    std::map<std::string, int> key_hits;
    int all_hits = 0;
    for (const auto& r : records) {
        ++acc.steps;
        bool all = true;
        for (const auto& k : keys) {
            const std::string* predicted = (r.context && r.context->state) ? r.context->state->find(k) : nullptr;
            bool hit = predicted && strings::normalize_ws(*predicted) == strings::normalize_ws(r.gold_state.get(k));
            if (hit)
                ++key_hits[k];
            else
                all = false;
        }
        if (all) ++all_hits;
    }
    acc.overall = static_cast<double>(all_hits) / acc.steps;
    for (const auto& k : keys) acc.per_key[k] = static_cast<double>(key_hits[k]) / acc.steps;
    return acc;
}

EpisodeSummary summarize(const agent::EpisodeResult& result) {
    return {result.env_id, result.success, result.steps_taken, result.max_steps};
}

double avg_steps(const std::vector<EpisodeSummary>& episodes, StepScope scope) {
    double total = 0;
    int n = 0;
    for (const auto& e : episodes) {
        if (scope == StepScope::SolvedOnly) {
            if (!e.success) continue;
            total += e.steps_taken;
        } else {
            total += e.success ? e.steps_taken : std::max(e.steps_taken, e.max_steps);
        }
        ++n;
    }
    if (n == 0) throw Error(ErrorKind::EmptyInput, "no episodes in scope");
    return total / n;
}

std::vector<Bucket> bucket_success(const std::vector<EpisodeSummary>& episodes, int bucket_width) {
    if (episodes.empty()) throw Error(ErrorKind::EmptyInput, "no episodes");
    if (bucket_width <= 0) throw Error(ErrorKind::Validation, "bucket width must be positive");
    auto position = [](const EpisodeSummary& e) {
        return std::max(1, e.success ? e.steps_taken : std::max(e.steps_taken, e.max_steps));
    };
    int top = 0;
    for (const auto& e : episodes) top = std::max(top, position(e));
    int count = (top + bucket_width - 1) / bucket_width;
    std::vector<Bucket> out;
    for (int i = 0; i < count; ++i) out.push_back({i * bucket_width + 1, (i + 1) * bucket_width, 0, 0});
    for (const auto& e : episodes) {
        auto& b = out[static_cast<std::size_t>((position(e) - 1) / bucket_width)];
        ++b.attempted;
        if (e.success) ++b.solved;
    }
    return out;
}

MetricsReport make_report(const std::string& variant_name, const std::string& environment,
                          const std::vector<EpisodeSummary>& episodes,
                          const std::vector<agent::StepRecord>& records, const AgentVariant& variant) {
    if (episodes.empty()) throw Error(ErrorKind::EmptyInput, "no episodes for " + variant_name);
    MetricsReport r;
    r.variant = variant_name;
    r.environment = environment;
    r.episodes = static_cast<int>(episodes.size());
    int solved = 0;
    for (const auto& e : episodes) solved += e.success ? 1 : 0;
    r.success_rate = static_cast<double>(solved) / r.episodes;
    r.avg_steps_all = avg_steps(episodes, StepScope::All);
    if (solved > 0) r.avg_steps_solved = avg_steps(episodes, StepScope::SolvedOnly);
    if (variant.include_state && !records.empty()) r.state_accuracy = state_accuracy(records, variant);
    r.buckets = bucket_success(episodes);
    for (const auto& rec : records) {
        if (rec.goal_drift) ++r.goal_drift_steps;
        if (!rec.context && !rec.raw_completion.empty()) ++r.parse_failures;
    }
    return r;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["variant"] = r.variant;
    j["environment"] = r.environment;
    j["episodes"] = r.episodes;
    j["success_rate"] = r.success_rate;
    j["avg_steps_all"] = r.avg_steps_all;
    j["avg_steps_solved"] = r.avg_steps_solved ? nlohmann::ordered_json(*r.avg_steps_solved) : nlohmann::ordered_json(nullptr);
    if (r.state_accuracy) {
        nlohmann::ordered_json per_key;
        for (const auto& [k, v] : r.state_accuracy->per_key) per_key[k] = v;
        j["state_accuracy"] = {{"overall", r.state_accuracy->overall},
                               {"per_key", per_key},
                               {"steps", r.state_accuracy->steps}};
    } else {
        j["state_accuracy"] = nullptr;
    }
    auto buckets = nlohmann::ordered_json::array();
    for (const auto& b : r.buckets)
        buckets.push_back({{"range", b.label()}, {"attempted", b.attempted}, {"solved", b.solved}});
    j["buckets"] = buckets;
    j["goal_drift_steps"] = r.goal_drift_steps;
    j["parse_failures"] = r.parse_failures;
    if (r.adapt)
        j["adapt"] = {{"trees", r.adapt->trees},
                      {"decomposed", r.adapt->decomposed},
                      {"max_depth", r.adapt->max_depth},
                      {"nodes", r.adapt->nodes}};
    return j;
}

std::string render_text(const std::vector<MetricsReport>& reports) {
    std::ostringstream out;
    for (const auto& r : reports) {
        out << r.variant << " / " << r.environment << "\n";
        out << "  episodes        " << r.episodes << "\n";
        out << "  success rate    " << fixed(r.success_rate) << "\n";
        out << "  avg steps (all) " << fixed(r.avg_steps_all) << "\n";
        out << "  avg steps (won) " << (r.avg_steps_solved ? fixed(*r.avg_steps_solved) : std::string("-")) << "\n";
        if (r.state_accuracy) {
            out << "  state accuracy  " << fixed(r.state_accuracy->overall);
            for (const auto& [k, v] : r.state_accuracy->per_key) out << "  [" << k << " " << fixed(v) << "]";
            out << "\n";
        }
        if (r.goal_drift_steps) out << "  goal drift      " << r.goal_drift_steps << " steps\n";
        if (r.parse_failures) out << "  parse failures  " << r.parse_failures << "\n";
        if (r.adapt)
            out << "  decomposition   " << r.adapt->decomposed << "/" << r.adapt->trees << " trees, "
                << r.adapt->nodes << " nodes, max depth " << r.adapt->max_depth << "\n";
        out << "  steps   attempted  solved\n";
        for (const auto& b : r.buckets)
            out << "  " << pad(b.label(), 7) << " " << pad(std::to_string(b.attempted), 9, true) << "  "
                << pad(std::to_string(b.solved), 6, true) << "\n";
        out << "\n";
    }

    // Cross table: rows are variants, columns environments.
    std::vector<std::string> variants;
    std::vector<std::string> envs;
    for (const auto& r : reports) {
        if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
        if (std::find(envs.begin(), envs.end(), r.environment) == envs.end()) envs.push_back(r.environment);
    }
    std::size_t w = 7;
    for (const auto& v : variants) w = std::max(w, v.size());
    out << pad("variant", w);
    for (const auto& e : envs) out << "  " << pad(e, std::max<std::size_t>(e.size(), 8), true);
    out << "\n";
    for (const auto& v : variants) {
        out << pad(v, w);
        for (const auto& e : envs) {
            std::string cell = "-";
            for (const auto& r : reports)
                if (r.variant == v && r.environment == e) cell = fixed(r.success_rate);
            out << "  " << pad(cell, std::max<std::size_t>(e.size(), 8), true);
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace chainstate::eval
