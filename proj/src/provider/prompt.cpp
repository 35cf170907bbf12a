#include "chorus/provider/prompt.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "prompt_assets.hpp"

namespace chorus {

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read prompt asset " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string strip_trailing_newlines(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

std::string single_line(std::string_view text) {
    std::string out(text);
    for (auto& c : out) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

}  // namespace

PromptConfig PromptConfig::builtin(std::string agent_name) {
    PromptConfig c;
    c.agent_name = std::move(agent_name);
    c.system_text = std::string(assets::kSystemText);
    c.one_shot = std::string(assets::kOneShot);
    return c;
}

void validate(const PromptConfig& config) {
    if (!is_valid_name(config.agent_name)) throw std::invalid_argument("prompt: agent_name must be a valid name");
    if (config.system_text.empty()) throw std::invalid_argument("prompt: system_text must not be empty");
    if (config.gen.creativity < 0.0 || config.gen.creativity > 1.0) {
        throw std::invalid_argument("prompt: creativity must lie in [0,1]");
    }
    if (config.gen.max_output_tokens < 1) throw std::invalid_argument("prompt: max_output_tokens must be >= 1");
}

PromptConfig load_prompt_config(const std::filesystem::path& dir, std::string agent_name) {
    PromptConfig c;
    c.agent_name = std::move(agent_name);
    c.system_text = read_file(dir / "system.txt");
    c.one_shot = read_file(dir / "one_shot.txt");
    validate(c);
    return c;
}

std::string render_template(std::string_view text, std::string_view agent_name) {
    static constexpr std::string_view kPlaceholder = "{{agent_name}}";
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto hit = text.find(kPlaceholder, pos);
        if (hit == std::string_view::npos) break;
        out.append(text.substr(pos, hit - pos));
        out.append(agent_name);
        pos = hit + kPlaceholder.size();
    }
    out.append(text.substr(pos));
    return out;
}

std::string render_line(const ChatEvent& event) {
    if (event.kind == EventKind::reaction) return event.author + ": :" + event.emoji.value_or("") + ":";
    return event.author + ": " + single_line(event.text.value_or(""));
}

std::vector<std::string> style_directives(const StylePolicy& style) {
    std::vector<std::string> out;
    switch (style.tone) {
        case Tone::neutral:
            break;
        case Tone::friendly:
            out.emplace_back("Use a friendly, conversational tone.");
            break;
        case Tone::formal:
            out.emplace_back("Use a formal, professional tone.");
            break;
    }
    if (style.min_reply_chars) {
        out.push_back("Replies should be at least " + std::to_string(*style.min_reply_chars) + " characters long.");
    }
    if (style.max_reply_chars) {
        out.push_back("Replies must not exceed " + std::to_string(*style.max_reply_chars) + " characters.");
    }
    if (style.bulleted_lists) out.emplace_back("When a reply contains several items, format them as a bulleted list.");
    return out;
}

std::string assemble_prompt(const PromptConfig& config, std::span<const ChatEvent> context) {
    std::string head = strip_trailing_newlines(render_template(config.system_text, config.agent_name));
    head += '\n';
    for (const auto& d : style_directives(config.style)) head += d + '\n';
    for (const auto& d : config.directives) head += render_template(d, config.agent_name) + '\n';
    head += "\n<CONVERSATION>\n";
    const auto shot = strip_trailing_newlines(render_template(config.one_shot, config.agent_name));
    if (!shot.empty()) head += shot + '\n';
    head += "</CONVERSATION>\n\n<CONVERSATION>\n";

    std::vector<std::string> lines;
    lines.reserve(context.size());
    std::size_t total = head.size();
    for (const auto& e : context) {
        lines.push_back(render_line(e));
        total += lines.back().size() + 1;
    }
    std::size_t first = 0;
    if (config.budget_chars > 0) {
        while (total > config.budget_chars && lines.size() - first > 1) {
            total -= lines[first].size() + 1;
            ++first;
        }
    }

    std::string prompt = std::move(head);
    for (std::size_t i = first; i < lines.size(); ++i) {
        prompt += lines[i];
        prompt += '\n';
    }
    return prompt;
}

}  // namespace chorus
