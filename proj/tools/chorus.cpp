#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "chorus/core/transcript.hpp"
#include "chorus/service/server.hpp"
#include "chorus/simbench/generator.hpp"
#include "chorus/simbench/invariants.hpp"
#include "chorus/simbench/metrics.hpp"
#include "chorus/simbench/replay.hpp"

namespace {

using namespace chorus;

struct CommonOptions {
    std::string settings_file;
    std::string presets_file;
    std::string prompt_dir;
    std::string agent_name = "Koala";
    std::size_t context_events = 50;
    bool retry_on_parse_error = false;

    void add(CLI::App& cmd) {
        cmd.add_option("--settings", settings_file, "AgentSettings JSON file")->check(CLI::ExistingFile);
        cmd.add_option("--presets", presets_file, "Behavior preset catalog JSON file")->check(CLI::ExistingFile);
        cmd.add_option("--prompt-dir", prompt_dir, "Directory with system.txt and one_shot.txt")->check(CLI::ExistingDirectory);
        cmd.add_option("--agent-name", agent_name, "Name the agent uses in the room");
        cmd.add_option("--context-events", context_events, "Events included in each prompt")->check(CLI::PositiveNumber);
        cmd.add_flag("--retry-on-parse-error", retry_on_parse_error, "Ask the provider again once when output does not parse");
    }

    AgentSettings settings() const { return settings_file.empty() ? AgentSettings{} : load_settings(settings_file); }
    PresetCatalog presets() const { return presets_file.empty() ? PresetCatalog::builtin() : load_presets(presets_file); }
    PromptConfig prompt() const {
        return prompt_dir.empty() ? PromptConfig::builtin(agent_name) : load_prompt_config(prompt_dir, agent_name);
    }
    EngineConfig engine() const { return EngineConfig{agent_name, context_events, retry_on_parse_error}; }

    ReplayOptions replay_options() const {
        ReplayOptions o;
        o.settings = settings();
        o.presets = presets();
        o.engine = engine();
        o.prompt = prompt();
        return o;
    }
};

template <typename T>
std::vector<T> split_list(const std::string& csv, T (*convert)(const std::string&)) {
    std::vector<T> out;
    std::stringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(convert(item));
    }
    return out;
}

ThresholdLevel parse_threshold(const std::string& s) {
    if (s == "high") return ThresholdLevel::high;
    if (s == "medium") return ThresholdLevel::medium;
    if (s == "low") return ThresholdLevel::low;
    throw CLI::ValidationError("--thresholds", "unknown level " + s);
}

int parse_int(const std::string& s) { return std::stoi(s); }
Millis parse_millis(const std::string& s) { return std::stoll(s); }

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

int report_invariants(const ReplayResult& result) {
    const auto violations = check_invariants(result);
    for (const auto& v : violations) std::cerr << "invariant violated: " << describe(v) << "\n";
    return violations.empty() ? 0 : 2;
}

std::unique_ptr<Backend> make_backend(const std::string& spec, const std::string& agent_name) {
    if (spec.rfind("scripted:", 0) == 0) {
        return std::make_unique<ScriptedBackend>(load_script(spec.substr(9)), agent_name);
    }
    if (spec.rfind("remote:", 0) == 0) {
        RemoteConfig config;
        config.url = spec.substr(7);
        config.agent_name = agent_name;
        if (const char* token = std::getenv("CHORUS_REMOTE_TOKEN")) config.token = token;
        return std::make_unique<RemoteBackend>(config);
    }
    throw CLI::ValidationError("--provider", "expected scripted:FILE or remote:URL");
}

int run_serve(const CommonOptions& common, const std::string& bind, const std::string& rooms_file,
              const std::string& provider, const std::string& transcript_dir, std::size_t backlog, bool full_history) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--bind", "expected HOST:PORT");
    const auto host = bind.substr(0, colon);
    const int port = std::stoi(bind.substr(colon + 1));

    ServerConfig config;
    if (!rooms_file.empty()) config.rooms = load_rooms(rooms_file);
    config.settings = common.settings();
    config.presets = common.presets();
    config.engine = common.engine();
    config.prompt = common.prompt();
    config.transcript_dir = transcript_dir;
    config.backlog = backlog;
    config.full_history = full_history;

    // Block the signals before any thread starts so only sigwait sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    ChatServer server(std::move(config), make_backend(provider, common.agent_name));
    const int bound = server.listen(host, port);
    spdlog::info("listening on {}:{}", host, bound);
    int received = 0;
    sigwait(&signals, &received);
    spdlog::info("shutting down");
    server.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-party chat agent: live server and offline simulation bench"};
    app.require_subcommand(1);

    CommonOptions common;

    auto* serve = app.add_subcommand("serve", "Run the chat server");
    std::string bind = "127.0.0.1:7878";
    std::string rooms_file;
    std::string provider;
    std::string transcript_dir;
    std::size_t backlog = 100;
    bool full_history = false;
    serve->add_option("--bind", bind, "HOST:PORT to listen on");
    serve->add_option("--rooms", rooms_file, "Rooms file; without it rooms are created on first hello")->check(CLI::ExistingFile);
    serve->add_option("--provider", provider, "scripted:FILE or remote:URL (token from CHORUS_REMOTE_TOKEN)")->required();
    serve->add_option("--transcript-dir", transcript_dir, "Where room transcripts and decision logs are kept");
    serve->add_option("--backlog", backlog, "Events sent to a client when it joins");
    serve->add_flag("--full-history", full_history, "Send the whole transcript on join");
    common.add(*serve);

    auto* replay_cmd = app.add_subcommand("replay", "Replay a transcript against a scripted provider");
    std::string transcript_file;
    std::string script_file;
    std::string out_file;
    std::string decisions_file;
    replay_cmd->add_option("--transcript", transcript_file, "Input transcript (JSONL)")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--script", script_file, "Provider script (JSON)")->required()->check(CLI::ExistingFile);
    replay_cmd->add_option("--out", out_file, "Output transcript (JSONL)");
    replay_cmd->add_option("--decisions", decisions_file, "Decision log output (JSONL)");
    common.add(*replay_cmd);

    auto* sweep_cmd = app.add_subcommand("sweep", "Replay once per setting and tabulate metrics");
    std::string thresholds;
    std::string rate_caps;
    std::string delays;
    std::string sweep_out;
    sweep_cmd->add_option("--transcript", transcript_file, "Input transcript (JSONL)")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--script", script_file, "Provider script (JSON)")->required()->check(CLI::ExistingFile);
    auto* t_opt = sweep_cmd->add_option("--thresholds", thresholds, "Comma-separated levels, e.g. high,medium,low");
    auto* r_opt = sweep_cmd->add_option("--rate-caps", rate_caps, "Comma-separated max posts per minute (0 = no cap)");
    auto* d_opt = sweep_cmd->add_option("--delays", delays, "Comma-separated initial delays in ms");
    t_opt->excludes(r_opt)->excludes(d_opt);
    r_opt->excludes(d_opt);
    sweep_cmd->add_option("--out", sweep_out, "TSV output file");
    common.add(*sweep_cmd);

    auto* gen_cmd = app.add_subcommand("generate", "Write a seeded random transcript and provider script");
    std::uint64_t seed = 1;
    GeneratorOptions gen;
    std::string gen_transcript;
    std::string gen_script;
    gen_cmd->add_option("--seed", seed, "Random seed");
    gen_cmd->add_option("--messages", gen.messages, "Human messages to generate")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--out-transcript", gen_transcript, "Transcript output (JSONL)")->required();
    gen_cmd->add_option("--out-script", gen_script, "Script output (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            return run_serve(common, bind, rooms_file, provider, transcript_dir, backlog, full_history);
        }
        if (*replay_cmd) {
            const auto result = replay(read_jsonl_events(transcript_file), load_script(script_file), common.replay_options());
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
            if (!out_file.empty()) write_jsonl_events(out_file, result.transcript);
            if (!decisions_file.empty()) result.log.write(decisions_file);
            const auto m = compute_metrics(result);
            std::cout << sweep_table({SweepPoint{"replay", Json::object(), m}});
            return report_invariants(result);
        }
        if (*sweep_cmd) {
            std::vector<std::pair<std::string, Json>> points;
            if (!thresholds.empty()) points = threshold_points(split_list(thresholds, parse_threshold));
            if (!rate_caps.empty()) points = rate_cap_points(split_list(rate_caps, parse_int));
            if (!delays.empty()) points = delay_points(split_list(delays, parse_millis));
            if (points.empty()) throw CLI::ValidationError("sweep", "give --thresholds, --rate-caps or --delays");
            const auto input = read_jsonl_events(transcript_file);
            const auto script = load_script(script_file);
            const auto base = common.replay_options();
            int status = 0;
            std::vector<SweepPoint> rows;
            for (const auto& point : points) {
                auto options = base;
                options.settings = apply_patch(base.settings, point.second);
                const auto result = replay(input, script, options);
                if (report_invariants(result) != 0) status = 2;
                rows.push_back(SweepPoint{point.first, point.second, compute_metrics(result)});
            }
            if (!sweep_out.empty()) write_file(sweep_out, sweep_tsv(rows));
            std::cout << sweep_table(rows);
            return status;
        }
        if (*gen_cmd) {
            const auto generated = generate_case(seed, gen);
            write_jsonl_events(gen_transcript, generated.transcript);
            write_file(gen_script, to_json(generated.script).dump(2) + "\n");
            std::cout << "seed " << generated.seed << ": " << generated.transcript.size() << " events\n";
            return 0;
        }
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
