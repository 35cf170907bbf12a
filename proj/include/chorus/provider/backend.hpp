#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chorus/core/types.hpp"
#include "chorus/provider/prompt.hpp"

namespace chorus {

struct GenerationResult {
    std::string text;
    std::optional<std::string> error;  // set when `text` is a synthetic PASS
};

// Text-generation backend. Implementations must be safe to call from any
// thread; the room loop guarantees one outstanding call per room.
class Backend {
public:
    virtual ~Backend() = default;
    virtual GenerationResult generate(const std::string& prompt, const ChatEvent& trigger, const GenParams& params) = 0;
};

struct ScriptRule {
    std::optional<Seq> seq;
    std::optional<std::string> contains;
    std::string emit;
};

// Deterministic stand-in for a model: the first rule matching the trigger wins.
struct ProviderScript {
    std::vector<ScriptRule> rules;
    std::optional<std::string> default_emit;  // PASS block when unset

    const ScriptRule* match(const ChatEvent& trigger) const;
};

// Accepts a bare array of rules or {"rules": [...], "default": ...}. A rule's
// "emit" may be raw text or a JSON object (serialized verbatim).
ProviderScript script_from_json(const Json& j);
ProviderScript load_script(const std::filesystem::path& path);
Json to_json(const ProviderScript& script);

class ScriptedBackend final : public Backend {
public:
    ScriptedBackend(ProviderScript script, std::string agent_name);
    GenerationResult generate(const std::string& prompt, const ChatEvent& trigger, const GenParams& params) override;

private:
    ProviderScript script_;
    std::string agent_name_;
};

struct RemoteConfig {
    std::string url;  // http(s)://host[:port]/path
    std::string token;
    std::chrono::milliseconds timeout{10'000};
    double max_temperature = 1.0;  // creativity 1.0 maps here
    std::string agent_name = "Koala";
};

// POSTs {prompt, max_tokens, temperature} and reads {text}. Transport errors,
// timeouts and malformed responses degrade to a synthetic PASS block.
class RemoteBackend final : public Backend {
public:
    explicit RemoteBackend(RemoteConfig config);
    GenerationResult generate(const std::string& prompt, const ChatEvent& trigger, const GenParams& params) override;

    double temperature_for(const GenParams& params) const;

private:
    RemoteConfig config_;
    std::string base_;
    std::string path_;
};

}  // namespace chorus
