#include "chorus/provider/decision_parser.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "chorus/core/text.hpp"
#include "chorus/core/types.hpp"

namespace chorus {

namespace {

using nlohmann::json;

constexpr std::size_t kMaxDepth = 128;
constexpr std::size_t kMaxCandidates = 512;

// Index of the brace closing the object that opens at `start`, honouring
// string literals. npos if the object never closes or nests too deep.
std::size_t balanced_end(std::string_view s, std::size_t start) {
    std::size_t depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_string = true;
                break;
            case '{':
            case '[':
                if (++depth > kMaxDepth) return std::string_view::npos;
                break;
            case ']':
                if (depth == 0) return std::string_view::npos;
                --depth;
                break;
            case '}':
                if (depth == 0) return std::string_view::npos;
                if (--depth == 0) return i;
                break;
            default:
                break;
        }
    }
    return std::string_view::npos;
}

// "<CHECK>", "<THUMBS UP>" and friends.
std::optional<std::string> token_shape(std::string_view reply) {
    const auto t = trim(reply);
    if (t.size() < 3 || t.front() != '<' || t.back() != '>') return std::nullopt;
    const auto inner = t.substr(1, t.size() - 2);
    std::string upper;
    for (char c : inner) {
        const auto u = static_cast<unsigned char>(c);
        if (!std::isalpha(u) && c != '_' && c != ' ') return std::nullopt;
        upper += static_cast<char>(std::toupper(u));
    }
    if (trim(upper).empty()) return std::nullopt;
    return std::string(trim(upper));
}

ParseError error(ParseError::Kind kind, std::string detail) { return ParseError{kind, std::move(detail)}; }

DecisionParse read_block(const json& j, std::string_view agent_name) {
    const auto reply_key = reply_field(agent_name);
    AgentDecision d;

    for (const char* key : {"source", "target"}) {
        const auto it = j.find(key);
        if (it == j.end()) return error(ParseError::Kind::missing_field, key);
        if (!it->is_string()) return error(ParseError::Kind::bad_value, key);
        (std::string_view(key) == "source" ? d.source : d.target) = it->get<std::string>();
    }

    const auto reply = j.find(reply_key);
    if (reply == j.end()) return error(ParseError::Kind::missing_field, reply_key);
    if (!reply->is_string()) return error(ParseError::Kind::bad_value, reply_key);

    const auto value = j.find("value");
    if (value == j.end()) return error(ParseError::Kind::missing_field, "value");
    if (!value->is_number_integer()) return error(ParseError::Kind::bad_value, "value");
    if (value->is_number_unsigned()) {
        const auto v = value->get<std::uint64_t>();
        if (v > 100) return error(ParseError::Kind::bad_value, "value");
        d.value = static_cast<int>(v);
    } else {
        const auto v = value->get<std::int64_t>();
        if (v < 0 || v > 100) return error(ParseError::Kind::bad_value, "value");
        d.value = static_cast<int>(v);
    }

    const auto decision = j.find("decision");
    if (decision == j.end()) return error(ParseError::Kind::missing_field, "decision");
    if (!decision->is_string()) return error(ParseError::Kind::bad_verdict, decision->dump());
    const auto verdict = std::string(trim(decision->get<std::string>()));
    if (verdict == "<SUBMIT>") {
        d.verdict = Verdict::SUBMIT;
    } else if (verdict == "<PASS>") {
        d.verdict = Verdict::PASS;
    } else {
        return error(ParseError::Kind::bad_verdict, verdict);
    }

    auto text = reply->get<std::string>();
    if (const auto token = token_shape(text)) {
        const auto parsed = token_from_name(*token);
        if (!parsed) return error(ParseError::Kind::unknown_reaction, *token);
        d.reaction = *parsed;
    } else {
        d.reply = std::move(text);
    }
    if (d.verdict == Verdict::SUBMIT && d.reply.empty() && !d.reaction) {
        return error(ParseError::Kind::missing_field, reply_key);
    }
    return d;
}

}  // namespace

std::string_view to_string(ParseError::Kind kind) {
    switch (kind) {
        case ParseError::Kind::no_json: return "no_json";
        case ParseError::Kind::missing_field: return "missing_field";
        case ParseError::Kind::bad_value: return "bad_value";
        case ParseError::Kind::bad_verdict: return "bad_verdict";
        case ParseError::Kind::unknown_reaction: return "unknown_reaction";
    }
    return "no_json";
}

std::string describe(const ParseError& e) {
    auto out = std::string(to_string(e.kind));
    if (!e.detail.empty()) out += "(" + e.detail + ")";
    return out;
}

std::string reply_field(std::string_view agent_name) { return std::string(agent_name) + "'s reply"; }

DecisionParse parse_decision(std::string_view raw, std::string_view agent_name) {
    std::size_t tried = 0;
    for (auto pos = raw.find('{'); pos != std::string_view::npos && tried < kMaxCandidates; pos = raw.find('{', pos + 1)) {
        const auto end = balanced_end(raw, pos);
        if (end == std::string_view::npos) continue;
        ++tried;
        const auto candidate = raw.substr(pos, end - pos + 1);
        const auto j = json::parse(candidate.begin(), candidate.end(), nullptr, false);
        if (j.is_discarded() || !j.is_object()) continue;
        // Objects sharing no key with a decision block are prose noise ("{}" etc).
        const bool block_like = j.contains("source") || j.contains("target") || j.contains("value") ||
                                j.contains("decision") || j.contains(reply_field(agent_name));
        if (!block_like) continue;
        return read_block(j, agent_name);
    }
    return error(ParseError::Kind::no_json, {});
}

std::string serialize_decision(const AgentDecision& d, std::string_view agent_name) {
    Json j;
    j["source"] = d.source;
    j["target"] = d.target;
    j[reply_field(agent_name)] = d.reaction ? "<" + std::string(token_name(*d.reaction)) + ">" : d.reply;
    j["value"] = d.value;
    j["decision"] = d.verdict == Verdict::SUBMIT ? "<SUBMIT>" : "<PASS>";
    return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

AgentDecision synthetic_pass(std::string_view source) {
    AgentDecision d;
    d.source = std::string(source);
    d.target = "all";
    d.value = 0;
    d.verdict = Verdict::PASS;
    return d;
}

std::string synthetic_pass_block(std::string_view source, std::string_view agent_name) {
    return serialize_decision(synthetic_pass(source), agent_name);
}

std::string_view map_reaction(ReactionToken token) {
    switch (token) {
        case ReactionToken::SMILE: return "slightly_smiling_face";
        case ReactionToken::LAUGH: return "laughing";
        case ReactionToken::LIKE: return "+1";
        case ReactionToken::CHECK: return "white_check_mark";
        case ReactionToken::HEART: return "heart";
        case ReactionToken::THUMBS_UP: return "+1";
        case ReactionToken::THUMBS_DOWN: return "-1";
        case ReactionToken::QUESTION: return "question";
        case ReactionToken::EXCLAMATION: return "exclamation";
        case ReactionToken::COOL: return "sunglasses";
    }
    return "slightly_smiling_face";
}

}  // namespace chorus
