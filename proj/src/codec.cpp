#include "chainstate/codec.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chainstate/error.hpp"
#include "chainstate/strings.hpp"

namespace chainstate::codec {

namespace {

using nlohmann::json;

const PromptLayout kHousehold{
    Dialect::Household,
    "goal",
    {"current location", "current inventory"},
    "locations visited",
    "thought",
    "action",
    ">",
    "",
    "Interact with a household to solve a task.",
};

const PromptLayout kWebshop{
    Dialect::Webshop,
    "Goal",
    {"Current Location", "Current Selection"},
    "",
    "Thought",
    "Action",
    "",
    "Observation:",
    "",
};

const PromptLayout kTextcraft{
    Dialect::Textcraft,
    "goal",
    {"current inventory"},
    "",
    "thought",
    "action",
    ">",
    "",
    "Craft the requested item by interacting with a crafting environment.",
};

constexpr std::string_view kExampleSeparator = "\n\n\n\n";
constexpr std::string_view kSectionSeparator = "\n\n\n";
constexpr std::string_view kBlockSeparator = "\n\n";

bool is_none(std::string_view v) { return strings::iequals(strings::trim(v), "none"); }

std::string json_key(std::string_view key) {
    auto k = strings::lower(key);
    for (auto& c : k)
        if (c == ' ') c = '_';
    return k;
}

// Marker that opens a context block under this variant; also the prompt's
// elicitation cue.
std::string block_marker(const AgentVariant& variant) {
    if (variant.format == Format::Json) return ">";
    return variant.include_goal ? layout(variant.dialect).marker : std::string();
}

enum class Field { Goal, State, Thought, Action, Unknown };

struct Classified {
    Field field = Field::Unknown;
    std::string state_key;   // canonical spelling when field == State
};

Classified classify(std::string_view raw_key, const PromptLayout& l) {
    std::string k = strings::lower(strings::trim(raw_key));
    for (auto& c : k)
        if (c == '_') c = ' ';
    if (k == strings::lower(l.goal_key)) return {Field::Goal, {}};
    if (k == strings::lower(l.thought_key)) return {Field::Thought, {}};
    if (k == strings::lower(l.action_key)) return {Field::Action, {}};
    for (const auto& s : l.state_keys)
        if (k == strings::lower(s)) return {Field::State, s};
    if (!l.visited_key.empty() && k == strings::lower(l.visited_key)) return {Field::State, l.visited_key};
    return {Field::Unknown, {}};
}

bool valid_key(std::string_view key) {
    if (key.empty() || key.size() > 40) return false;
    if (!std::isalpha(static_cast<unsigned char>(key.front()))) return false;
    for (char c : key) {
        if (!(std::isalpha(static_cast<unsigned char>(c)) || c == ' ' || c == '_' || c == '-')) return false;
    }
    return true;
}

std::string_view strip_markers(std::string_view line) {
    while (!line.empty() && (line.front() == '>' || strings::is_space(line.front()))) line.remove_prefix(1);
    return line;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    auto lines = strings::split(text, "\n");
    for (auto& l : lines)
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    return lines;
}

bool any_content(const std::vector<std::string_view>& lines, std::size_t from) {
    for (std::size_t i = from; i < lines.size(); ++i)
        if (!strings::trim(lines[i]).empty()) return true;
    return false;
}

// Accumulates fields as they are recovered, enforcing first-wins and the
// variant's enabled set.
class Assembler {
public:
    Assembler(const AgentVariant& variant, ParseResult& out)
        : variant_(variant), layout_(layout(variant.dialect)), out_(out) {}

    bool action_seen() const { return action_.has_value(); }

    // JSON objects carry no field order, so a key after "action" does not
    // start a new block.
    void set_unordered(bool unordered) { unordered_ = unordered; }

    // Returns false when the block must end here.
    bool accept(std::string_view key, std::optional<std::string> value) {
        auto c = classify(key, layout_);
        if (c.field == Field::Unknown) {
            out_.recoveries.push_back(Recovery::UnknownKeyIgnored);
            return true;
        }
        if (action_seen()) {
            if (c.field == Field::Action) {
                out_.recoveries.push_back(Recovery::ExtraActionIgnored);
                return true;
            }
            if (!unordered_) {
                out_.recoveries.push_back(Recovery::StoppedAtNewBlock);
                return false;
            }
        }
        std::string seen_key = c.field == Field::State ? c.state_key : std::to_string(static_cast<int>(c.field));
        if (std::find(seen_.begin(), seen_.end(), seen_key) != seen_.end()) {
            out_.recoveries.push_back(Recovery::DuplicateKeyIgnored);
            return true;
        }
        switch (c.field) {
            case Field::Goal:
                seen_.push_back(seen_key);
                goal_ = value.value_or("None");
                break;
            case Field::State:
                seen_.push_back(seen_key);
                state_.emplace_back(c.state_key, value.value_or("None"));
                break;
            case Field::Thought:
                seen_.push_back(seen_key);
                if (value && !is_none(*value)) thought_ = *value;
                break;
            case Field::Action:
                if (!value || value->empty()) {
                    out_.recoveries.push_back(Recovery::StrayLineDiscarded);
                    return true;
                }
                action_ = *value;
                break;
            case Field::Unknown:
                break;
        }
        return true;
    }

    void finish() {
        auto& ctx = out_.context;
        if (!action_) throw Error(ErrorKind::ParseFailure, "no action line in completion");
        ctx.action = *action_;
        if (variant_.include_goal) {
            if (goal_)
                ctx.goal = goal_;
            else
                out_.missing.push_back(layout_.goal_key);
        }
        if (variant_.include_state) {
            StateFields fields;
            for (const auto& key : state_keys(variant_)) {
                auto it = std::find_if(state_.begin(), state_.end(), [&](const auto& e) { return e.first == key; });
                if (it == state_.end())
                    out_.missing.push_back(key);
                else
                    fields.set(key, it->second);
            }
            ctx.state = std::move(fields);
        }
        if (variant_.include_thought) {
            ctx.thought = thought_;
            if (std::find(seen_.begin(), seen_.end(), std::to_string(static_cast<int>(Field::Thought))) == seen_.end())
                out_.missing.push_back(layout_.thought_key);
        }
    }

private:
    const AgentVariant& variant_;
    const PromptLayout& layout_;
    ParseResult& out_;
    bool unordered_ = false;
    std::vector<std::string> seen_;
    std::optional<std::string> goal_;
    std::vector<StateFields::Entry> state_;
    std::optional<std::string> thought_;
    std::optional<std::string> action_;
};

template <typename Json>
std::optional<std::string> json_value_text(const Json& v) {
    if (v.is_null()) return std::nullopt;
    if (v.is_string()) return v.template get<std::string>();
    return v.dump();
}

void parse_json_block(const std::vector<std::string_view>& lines, std::size_t start, Assembler& sink,
                      ParseResult& out) {
    // Collect the object: from the '{' line through the first line ending in '}'.
    std::size_t end = start;
    std::string joined;
    for (; end < lines.size(); ++end) {
        if (strings::trim(lines[end]).empty()) break;
        std::string_view l = end == start ? strip_markers(lines[end]) : lines[end];
        joined += l;
        joined += '\n';
        if (!strings::trim(l).empty() && strings::trim(l).back() == '}') {
            ++end;
            break;
        }
    }

    sink.set_unordered(true);
    bool strict_ok = false;
    try {
        auto obj = nlohmann::ordered_json::parse(joined);
        if (obj.is_object()) {
            strict_ok = true;
            for (auto it = obj.begin(); it != obj.end(); ++it) {
                if (!sink.accept(it.key(), json_value_text(it.value()))) break;
            }
        }
    } catch (const nlohmann::ordered_json::exception&) {
    }

    if (!strict_ok) {
        out.recoveries.push_back(Recovery::LenientJson);
        static const std::regex pair(R"re(^\s*"([^"]*)"\s*:\s*(.*)$)re");
        for (auto raw : strings::split(joined, "\n")) {
            std::string_view l = strings::trim(raw);
            if (!l.empty() && l.front() == '{') l = strings::trim(l.substr(1));
            if (!l.empty() && l.back() == '}') l = strings::trim(l.substr(0, l.size() - 1));
            if (!l.empty() && l.back() == ',') l = strings::trim(l.substr(0, l.size() - 1));
            if (l.empty()) continue;
            std::cmatch m;
            if (!std::regex_match(l.begin(), l.end(), m, pair)) continue;
            std::string key = m[1].str();
            std::string value_text = std::string(strings::trim(m[2].str()));
            std::optional<std::string> value;
            if (value_text == "None" || value_text == "null") {
                value = std::nullopt;
            } else {
                try {
                    value = json_value_text(json::parse(value_text));
                } catch (const json::exception&) {
                    auto first = value_text.find('"');
                    auto last = value_text.rfind('"');
                    value = (first != std::string::npos && last > first)
                                ? value_text.substr(first + 1, last - first - 1)
                                : value_text;
                }
            }
            if (!sink.accept(key, value)) break;
        }
    }

    if (any_content(lines, end)) out.recoveries.push_back(Recovery::StoppedAtObservation);
}

void parse_plain_block(const std::vector<std::string_view>& lines, std::size_t start, Assembler& sink,
                       ParseResult& out) {
    for (std::size_t i = start; i < lines.size(); ++i) {
        auto line = lines[i];
        if (strings::trim(line).empty()) {
            if (any_content(lines, i)) out.recoveries.push_back(Recovery::StoppedAtBlankLine);
            return;
        }
        auto body = strip_markers(line);
        auto colon = body.find(':');
        std::string_view key = colon == std::string_view::npos ? std::string_view{} : strings::trim(body.substr(0, colon));
        if (!valid_key(key)) {
            if (sink.action_seen()) {
                out.recoveries.push_back(Recovery::StoppedAtObservation);
                return;
            }
            out.recoveries.push_back(Recovery::StrayLineDiscarded);
            continue;
        }
        if (strings::iequals(key, "observation")) {
            out.recoveries.push_back(Recovery::StoppedAtObservation);
            return;
        }
        std::string value(strings::trim(body.substr(colon + 1)));
        if (!sink.accept(key, std::move(value))) return;
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Trace parse_example(std::string_view text, Dialect dialect, std::size_t& recoveries) {
    auto chunks = strings::split(text, kBlockSeparator);
    if (chunks.empty() || strings::trim(chunks.front()).empty())
        throw Error(ErrorKind::Validation, "few-shot example without an initial observation");
    Trace trace;
    trace.initial = Observation{0, std::string(chunks.front()), true};
    auto full = full_variant(dialect);
    for (std::size_t i = 1; i < chunks.size(); i += 2) {
        auto parsed = parse_completion(chunks[i], full);
        recoveries += parsed.recoveries.size();
        TraceStep step{std::move(parsed.context), std::nullopt};
        if (i + 1 < chunks.size()) {
            const auto& l = layout(dialect);
            if (!l.observation_prefix.empty() && !strings::istarts_with(chunks[i + 1], l.observation_prefix))
                ++recoveries;
            step.observation = parse_observation(chunks[i + 1], dialect, static_cast<int>(trace.steps.size()) + 1);
        }
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

std::string examples_header(std::size_t n) {
    return n == 1 ? std::string("Here is 1 example:") : "Here are " + std::to_string(n) + " examples:";
}

}  // namespace

const PromptLayout& layout(Dialect dialect) {
    switch (dialect) {
        case Dialect::Household: return kHousehold;
        case Dialect::Webshop: return kWebshop;
        case Dialect::Textcraft: return kTextcraft;
    }
    return kHousehold;
}

std::string_view to_string(Recovery recovery) {
    switch (recovery) {
        case Recovery::LeadingBlankSkipped: return "leading-blank-skipped";
        case Recovery::StoppedAtBlankLine: return "stopped-at-blank-line";
        case Recovery::StoppedAtObservation: return "stopped-at-observation";
        case Recovery::StoppedAtNewBlock: return "stopped-at-new-block";
        case Recovery::ExtraActionIgnored: return "extra-action-ignored";
        case Recovery::UnknownKeyIgnored: return "unknown-key-ignored";
        case Recovery::DuplicateKeyIgnored: return "duplicate-key-ignored";
        case Recovery::StrayLineDiscarded: return "stray-line-discarded";
        case Recovery::LenientJson: return "lenient-json";
    }
    return "unknown";
}

std::string serialize_context(const AgentContext& ctx, const AgentVariant& variant) {
    const auto& l = layout(variant.dialect);
    std::vector<std::string> lines;

    if (variant.format == Format::Json) {
        auto quoted = [](const std::string& s) { return json(s).dump(); };
        auto nullable = [&](const std::optional<std::string>& s) {
            return (!s || is_none(*s)) ? std::string("null") : quoted(*s);
        };
        if (variant.include_goal) lines.push_back("\"goal\": " + quoted(ctx.goal.value_or("")));
        if (variant.include_state && ctx.state) {
            for (const auto& key : state_keys(variant))
                if (const auto* v = ctx.state->find(key))
                    lines.push_back("\"" + json_key(key) + "\": " + nullable(*v));
        }
        if (variant.include_thought) lines.push_back("\"thought\": " + nullable(ctx.thought));
        lines.push_back("\"action\": " + quoted(ctx.action));
        return ">{" + strings::join(lines, ",\n") + "\n}";
    }

    if (variant.include_goal) lines.push_back(l.goal_key + ": " + ctx.goal.value_or(""));
    if (variant.include_state && ctx.state) {
        for (const auto& key : state_keys(variant))
            if (const auto* v = ctx.state->find(key)) lines.push_back(key + ": " + *v);
    }
    if (variant.include_thought) lines.push_back(l.thought_key + ": " + ctx.thought.value_or("None"));
    lines.push_back(l.action_key + ": " + ctx.action);
    return block_marker(variant) + strings::join(lines, "\n");
}

ParseResult parse_completion(std::string_view text, const AgentVariant& variant) {
    ParseResult out;
    auto lines = split_lines(text);
    std::size_t start = 0;
    while (start < lines.size() && strings::trim(lines[start]).empty()) ++start;
    if (start >= lines.size()) throw Error(ErrorKind::ParseFailure, "empty completion");
    if (start > 0) out.recoveries.push_back(Recovery::LeadingBlankSkipped);

    Assembler sink(variant, out);
    auto first = strip_markers(lines[start]);
    if (!first.empty() && first.front() == '{')
        parse_json_block(lines, start, sink, out);
    else
        parse_plain_block(lines, start, sink, out);
    sink.finish();
    return out;
}

std::string serialize_observation(const Observation& obs, Dialect dialect) {
    const auto& l = layout(dialect);
    if (l.observation_prefix.empty()) return obs.text;
    if (obs.text.find('\n') != std::string::npos) return l.observation_prefix + " \n" + obs.text;
    return l.observation_prefix + " " + obs.text;
}

Observation parse_observation(std::string_view chunk, Dialect dialect, int step_index) {
    const auto& l = layout(dialect);
    std::string_view body = chunk;
    if (!l.observation_prefix.empty() && strings::istarts_with(body, l.observation_prefix)) {
        body.remove_prefix(l.observation_prefix.size());
        if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
        if (!body.empty() && body.front() == '\n') body.remove_prefix(1);
    }
    return Observation{step_index, std::string(body), true};
}

std::string serialize_trace(const Trace& trace, const AgentVariant& variant) {
    std::string out = trace.initial.text;
    for (const auto& step : trace.steps) {
        out += kBlockSeparator;
        out += serialize_context(step.context, variant);
        if (step.observation) {
            out += kBlockSeparator;
            out += serialize_observation(*step.observation, variant.dialect);
        }
    }
    return out;
}

std::string render_example(const Trace& example, const AgentVariant& variant) {
    return serialize_trace(example, variant);
}

PromptDocument parse_prompt_document(std::string_view text, Dialect dialect) {
    PromptDocument doc;
    doc.dialect = dialect;
    const auto& l = layout(dialect);
    std::string_view rest = text;
    if (!rest.empty() && rest.back() == '\n') {
        doc.final_newline = true;
        rest.remove_suffix(1);
    }
    if (!l.preamble.empty() && rest.starts_with(l.preamble) &&
        rest.substr(l.preamble.size()).starts_with(kSectionSeparator)) {
        doc.has_preamble = true;
        rest.remove_prefix(l.preamble.size() + kSectionSeparator.size());
    }
    static const std::regex header(R"(^Here (?:are (\d+) examples|is 1 example):\n\n)");
    std::cmatch m;
    std::optional<std::size_t> declared;
    if (std::regex_search(rest.begin(), rest.end(), m, header)) {
        doc.has_header = true;
        declared = m[1].matched ? std::stoul(m[1].str()) : 1;
        rest.remove_prefix(static_cast<std::size_t>(m.length(0)));
    }
    std::string trailer = std::string(kSectionSeparator) + std::string(kTaskMarker) + "\n" + std::string(kTaskPlaceholder);
    if (rest.ends_with(trailer)) {
        doc.has_trailer = true;
        rest.remove_suffix(trailer.size());
    }
    for (auto example : strings::split(rest, kExampleSeparator))
        doc.examples.push_back(parse_example(example, dialect, doc.recoveries));
    if (declared && *declared != doc.examples.size())
        throw Error(ErrorKind::Validation, "prompt header declares " + std::to_string(*declared) +
                                               " examples but " + std::to_string(doc.examples.size()) +
                                               " were found");
    return doc;
}

std::string serialize_prompt_document(const PromptDocument& doc, const AgentVariant& variant) {
    const auto& l = layout(doc.dialect);
    std::string out;
    if (doc.has_preamble) out += l.preamble + std::string(kSectionSeparator);
    if (doc.has_header) out += examples_header(doc.examples.size()) + "\n\n";
    std::vector<std::string> rendered;
    for (const auto& e : doc.examples) rendered.push_back(render_example(e, variant));
    out += strings::join(rendered, kExampleSeparator);
    if (doc.has_trailer) out += std::string(kSectionSeparator) + std::string(kTaskMarker) + "\n" + std::string(kTaskPlaceholder);
    if (doc.final_newline) out += "\n";
    return out;
}

FewShotSet load_few_shot(const std::filesystem::path& path, Dialect dialect, std::optional<std::string> task_type) {
    auto doc = parse_prompt_document(read_file(path), dialect);
    return FewShotSet{dialect, std::move(task_type), std::move(doc.examples)};
}

std::string render_prompt(const FewShotSet& few_shot, const Trace& trace, const AgentVariant& variant) {
    if (few_shot.dialect != variant.dialect)
        throw Error(ErrorKind::Validation, "few-shot dialect does not match the variant");
    const auto& l = layout(variant.dialect);
    std::string out;
    if (!l.preamble.empty()) out += l.preamble + std::string(kSectionSeparator);
    if (!few_shot.examples.empty()) {
        if (!l.preamble.empty()) out += examples_header(few_shot.examples.size()) + "\n\n";
        std::vector<std::string> rendered;
        for (const auto& e : few_shot.examples) rendered.push_back(render_example(e, variant));
        out += strings::join(rendered, kExampleSeparator);
        out += kSectionSeparator;
    }
    out += kTaskMarker;
    out += "\n";
    out += serialize_trace(trace, variant);
    out += kBlockSeparator;
    out += block_marker(variant);
    return out;
}

TruncationPolicy parse_truncation_policy(std::string_view text) {
    auto t = strings::lower(strings::trim(text));
    if (t == "tail_slice" || t == "tail-slice" || t == "tailslice") return TruncationPolicy::TailSlice;
    if (t == "drop_oldest_steps" || t == "drop-oldest-steps" || t == "dropoldeststeps")
        return TruncationPolicy::DropOldestSteps;
    throw Error(ErrorKind::Validation, "unknown truncation policy '" + std::string(text) + "'");
}

std::string truncate_prompt(std::string_view prompt, std::size_t max_chars, TruncationPolicy policy) {
    if (max_chars == 0) throw Error(ErrorKind::Validation, "max_chars must be positive");
    if (prompt.size() <= max_chars) return std::string(prompt);
    if (policy == TruncationPolicy::TailSlice) return std::string(prompt.substr(prompt.size() - max_chars));

    std::string marker = std::string(kTaskMarker) + "\n";
    auto pos = prompt.rfind(marker);
    if (pos == std::string_view::npos)
        throw Error(ErrorKind::TooLongIrreducible, "prompt has no current-task section to shorten");
    std::string_view head = prompt.substr(0, pos + marker.size());
    std::string_view tail = prompt.substr(pos + marker.size());

    std::string_view cue;
    for (std::string_view candidate : {std::string_view("\n\n>"), std::string_view("\n\n")}) {
        if (tail.ends_with(candidate)) {
            cue = candidate;
            break;
        }
    }
    tail.remove_suffix(cue.size());

    auto chunks = strings::split(tail, kBlockSeparator);
    std::string_view initial = chunks.front();
    std::vector<std::string_view> history(chunks.begin() + 1, chunks.end());

    auto assemble = [&] {
        std::string out(head);
        out += initial;
        for (auto c : history) {
            out += kBlockSeparator;
            out += c;
        }
        out += cue;
        return out;
    };

    std::string out = assemble();
    while (out.size() > max_chars && history.size() >= 2) {
        history.erase(history.begin(), history.begin() + 2);
        out = assemble();
    }
    if (out.size() > max_chars)
        throw Error(ErrorKind::TooLongIrreducible, "preamble, examples and initial observation exceed " +
                                                       std::to_string(max_chars) + " characters");
    return out;
}

std::size_t word_count(std::string_view text) { return strings::split_words(text).size(); }

}  // namespace chainstate::codec
