#include "chainstate/types.hpp"

#include "chainstate/codec.hpp"
#include "chainstate/error.hpp"
#include "chainstate/strings.hpp"

namespace chainstate {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MissingTaskMarker: return "MissingTaskMarker";
        case ErrorKind::ParseFailure: return "ParseFailure";
        case ErrorKind::BackendError: return "BackendError";
        case ErrorKind::ReplayMiss: return "ReplayMiss";
        case ErrorKind::UnknownItem: return "UnknownItem";
        case ErrorKind::NoItemAtDepth: return "NoItemAtDepth";
        case ErrorKind::EpisodeFinished: return "EpisodeFinished";
        case ErrorKind::TooLongIrreducible: return "TooLongIrreducible";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::NoStateVariant: return "NoStateVariant";
        case ErrorKind::Validation: return "Validation";
        case ErrorKind::UnrecognizedAction: return "UnrecognizedAction";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

std::string_view to_string(Dialect dialect) {
    switch (dialect) {
        case Dialect::Household: return "household";
        case Dialect::Webshop: return "webshop";
        case Dialect::Textcraft: return "textcraft";
    }
    return "household";
}

std::string_view to_string(Format format) {
    return format == Format::Json ? "json" : "text";
}

Dialect parse_dialect(std::string_view text) {
    auto t = strings::lower(strings::trim(text));
    if (t == "household" || t == "alfworld") return Dialect::Household;
    if (t == "webshop") return Dialect::Webshop;
    if (t == "textcraft") return Dialect::Textcraft;
    throw Error(ErrorKind::Validation, "unknown dialect '" + std::string(text) + "'");
}

Format parse_format(std::string_view text) {
    auto t = strings::lower(strings::trim(text));
    if (t == "text" || t == "plain" || t == "plaintext") return Format::PlainText;
    if (t == "json") return Format::Json;
    throw Error(ErrorKind::Validation, "unknown format '" + std::string(text) + "'");
}

void StateFields::set(std::string key, std::string value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    entries_.emplace_back(std::move(key), std::move(value));
}

const std::string* StateFields::find(std::string_view key) const {
    for (const auto& [k, v] : entries_)
        if (k == key) return &v;
    return nullptr;
}

std::string AgentVariant::label() const {
    std::string out;
    if (include_goal) out += "Goal+";
    if (include_state) out += "State+";
    if (include_thought) out += "Thought+";
    out += "Act";
    return out;
}

std::vector<AgentVariant> ablation_variants(Dialect dialect, Format format) {
    std::vector<AgentVariant> out;
    for (int bits = 0; bits < 8; ++bits) {
        AgentVariant v;
        v.include_goal = (bits & 4) != 0;
        v.include_state = (bits & 2) != 0;
        v.include_thought = (bits & 1) != 0;
        v.dialect = dialect;
        v.format = format;
        v.name = strings::lower(v.label());
        for (auto& c : v.name)
            if (c == '+') c = '-';
        if (format == Format::Json) v.name += "-json";
        out.push_back(std::move(v));
    }
    return out;
}

AgentVariant full_variant(Dialect dialect, Format format) {
    return ablation_variants(dialect, format).back();
}

std::vector<std::string> state_keys(const AgentVariant& variant) {
    if (!variant.include_state) return {};
    const auto& l = codec::layout(variant.dialect);
    auto keys = l.state_keys;
    if (variant.track_visited && !l.visited_key.empty()) keys.push_back(l.visited_key);
    return keys;
}

}  // namespace chainstate
