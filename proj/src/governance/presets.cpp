#include "chorus/governance/presets.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "chorus/governance/settings.hpp"

namespace chorus {

PresetCatalog::PresetCatalog(std::vector<BehaviorPreset> presets) : presets_(std::move(presets)) {}

PresetCatalog PresetCatalog::builtin() {
    std::vector<BehaviorPreset> presets;
    presets.push_back({
        "brainstormer",
        "Brainstormer",
        {{"threshold", "low"},{"rate", {{"speak_first", false}}}},
        {"Offer one new, concrete idea at a time and build on what others have said."},
    });
    presets.push_back({
        "summarizer",
        "Summarizer",
        {{"threshold", "high"}, {"style", {{"bulleted_lists", true}}}},
        {"Summarize, never add new ideas. Summaries only restate what the group already said."},
    });
    presets.push_back({
        "critic",
        "Critic",
        {{"threshold", "medium"}, {"style", {{"tone", "formal"}}}},
        {"Give constructive criticism of ideas already on the table; point out risks and gaps."},
    });
    presets.push_back({
        "devils_advocate",
        "Devil's Advocate",
        {{"threshold", "medium"}},
        {"Argue the opposing side of the group's current direction, politely and briefly."},
    });
    return PresetCatalog(std::move(presets));
}

const BehaviorPreset* PresetCatalog::find(const std::string& id) const {
    for (const auto& p : presets_) {
        if (p.id == id) return &p;
    }
    return nullptr;
}

Json to_json(const BehaviorPreset& p) {
    return Json{{"id", p.id}, {"label", p.label}, {"settings_patch", p.settings_patch}, {"prompt_patch", p.prompt_patch}};
}

Json to_json(const PresetCatalog& catalog) {
    Json arr = Json::array();
    for (const auto& p : catalog.all()) arr.push_back(to_json(p));
    return arr;
}

PresetCatalog presets_from_json(const Json& j) {
    if (!j.is_array()) throw SettingsError("presets: expected array");
    std::vector<BehaviorPreset> presets;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& item = j[i];
        const auto where = "presets[" + std::to_string(i) + "]";
        if (!item.is_object()) throw SettingsError(where + ": expected object");
        for (const auto& [key, _] : item.items()) {
            if (key != "id" && key != "label" && key != "settings_patch" && key != "prompt_patch") {
                throw SettingsError(where + "." + key + ": unknown field");
            }
        }
        BehaviorPreset p;
        if (!item.contains("id") || !item["id"].is_string() || item["id"].get<std::string>().empty()) {
            throw SettingsError(where + ".id: expected non-empty string");
        }
        p.id = item["id"].get<std::string>();
        if (!ids.insert(p.id).second) throw SettingsError(where + ".id: duplicate preset id " + p.id);
        p.label = item.value("label", p.id);
        if (item.contains("settings_patch")) {
            p.settings_patch = item["settings_patch"];
            try {
                validate_patch(p.settings_patch);
                (void)apply_patch(AgentSettings{}, p.settings_patch);
            } catch (const SettingsError& e) {
                throw SettingsError(where + ".settings_patch." + e.what());
            }
        }
        if (item.contains("prompt_patch")) {
            const auto& pp = item["prompt_patch"];
            if (pp.is_string()) {
                p.prompt_patch.push_back(pp.get<std::string>());
            } else if (pp.is_array()) {
                for (const auto& line : pp) {
                    if (!line.is_string()) throw SettingsError(where + ".prompt_patch: expected strings");
                    p.prompt_patch.push_back(line.get<std::string>());
                }
            } else {
                throw SettingsError(where + ".prompt_patch: expected string or array of strings");
            }
        }
        presets.push_back(std::move(p));
    }
    return PresetCatalog(std::move(presets));
}

PresetCatalog load_presets(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read presets file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto j = Json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw SettingsError(path.string() + ": not valid JSON");
    return presets_from_json(j);
}

}  // namespace chorus
