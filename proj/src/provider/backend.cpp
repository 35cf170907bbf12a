#include "chorus/provider/backend.hpp"

#include <fstream>
#include <sstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "chorus/provider/decision_parser.hpp"

namespace chorus {

const ScriptRule* ProviderScript::match(const ChatEvent& trigger) const {
    for (const auto& rule : rules) {
        if (rule.seq && *rule.seq != trigger.seq) continue;
        if (rule.contains && trigger.text.value_or("").find(*rule.contains) == std::string::npos) continue;
        return &rule;
    }
    return nullptr;
}

namespace {

std::string emit_text(const Json& emit, const std::string& where) {
    if (emit.is_string()) return emit.get<std::string>();
    if (emit.is_object()) return emit.dump();
    throw std::invalid_argument(where + ": emit must be a string or an object");
}

ScriptRule rule_from_json(const Json& j, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + ": expected object");
    ScriptRule rule;
    for (const auto& [key, _] : j.items()) {
        if (key != "match" && key != "emit") throw std::invalid_argument(where + "." + key + ": unknown field");
    }
    if (const auto it = j.find("match"); it != j.end()) {
        if (!it->is_object()) throw std::invalid_argument(where + ".match: expected object");
        for (const auto& [key, value] : it->items()) {
            if (key == "seq") {
                if (!value.is_number_integer()) throw std::invalid_argument(where + ".match.seq: expected integer");
                rule.seq = value.get<Seq>();
            } else if (key == "contains") {
                if (!value.is_string()) throw std::invalid_argument(where + ".match.contains: expected string");
                rule.contains = value.get<std::string>();
            } else {
                throw std::invalid_argument(where + ".match." + key + ": unknown field");
            }
        }
    }
    const auto emit = j.find("emit");
    if (emit == j.end()) throw std::invalid_argument(where + ".emit: missing field");
    rule.emit = emit_text(*emit, where + ".emit");
    return rule;
}

}  // namespace

ProviderScript script_from_json(const Json& j) {
    ProviderScript script;
    const Json* rules = &j;
    if (j.is_object()) {
        for (const auto& [key, _] : j.items()) {
            if (key != "rules" && key != "default") throw std::invalid_argument("script." + key + ": unknown field");
        }
        if (!j.contains("rules")) throw std::invalid_argument("script.rules: missing field");
        rules = &j.at("rules");
        if (j.contains("default")) script.default_emit = emit_text(j.at("default"), "script.default");
    }
    if (!rules->is_array()) throw std::invalid_argument("script: expected array of rules");
    for (std::size_t i = 0; i < rules->size(); ++i) {
        script.rules.push_back(rule_from_json((*rules)[i], "script[" + std::to_string(i) + "]"));
    }
    return script;
}

ProviderScript load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read script file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto j = Json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument(path.string() + ": not valid JSON");
    return script_from_json(j);
}

Json to_json(const ProviderScript& script) {
    Json rules = Json::array();
    for (const auto& r : script.rules) {
        Json match = Json::object();
        if (r.seq) match["seq"] = *r.seq;
        if (r.contains) match["contains"] = *r.contains;
        rules.push_back(Json{{"match", match}, {"emit", r.emit}});
    }
    if (!script.default_emit) return rules;
    return Json{{"rules", rules}, {"default", *script.default_emit}};
}

ScriptedBackend::ScriptedBackend(ProviderScript script, std::string agent_name)
    : script_(std::move(script)), agent_name_(std::move(agent_name)) {}

GenerationResult ScriptedBackend::generate(const std::string&, const ChatEvent& trigger, const GenParams&) {
    if (const auto* rule = script_.match(trigger)) return {rule->emit, std::nullopt};
    if (script_.default_emit) return {*script_.default_emit, std::nullopt};
    return {synthetic_pass_block(trigger.author, agent_name_), std::nullopt};
}

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("remote url needs a scheme: " + config_.url);
    const auto path_start = config_.url.find('/', scheme_end + 3);
    base_ = config_.url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
}

double RemoteBackend::temperature_for(const GenParams& params) const {
    return params.creativity * config_.max_temperature;
}

GenerationResult RemoteBackend::generate(const std::string& prompt, const ChatEvent& trigger, const GenParams& params) {
    const auto fail = [&](std::string why) {
        spdlog::warn("remote provider failed for seq {}: {}", trigger.seq, why);
        return GenerationResult{synthetic_pass_block(trigger.author, config_.agent_name), std::move(why)};
    };

    httplib::Client client(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (!config_.token.empty()) headers.emplace("Authorization", "Bearer " + config_.token);

    const Json body{{"prompt", prompt}, {"max_tokens", params.max_output_tokens}, {"temperature", temperature_for(params)}};
    const auto res = client.Post(path_, headers, body.dump(-1, ' ', false, Json::error_handler_t::replace), "application/json");
    if (!res) return fail("transport error: " + httplib::to_string(res.error()));
    if (res->status != 200) return fail("http status " + std::to_string(res->status));

    const auto reply = Json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
        return fail("response lacks a text field");
    }
    return {reply["text"].get<std::string>(), std::nullopt};
}

}  // namespace chorus
