// Command line front end: run scenarios, validate them, list bundled presets.
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "afc/scenario.hpp"
#include "afc/scenario_runner.hpp"

namespace {

namespace fs = std::filesystem;

fs::path exe_dir() {
    std::error_code ec;
    fs::path p = fs::read_symlink("/proc/self/exe", ec);
    if (ec)
        return {};
    return p.parent_path();
}

// Preset search order: explicit env override, working directory, alongside the binary.
std::vector<fs::path> preset_dirs() {
    std::vector<fs::path> dirs;
    if (const char* env = std::getenv("AFC_SIM_PRESETS"))
        dirs.emplace_back(env);
    dirs.emplace_back("presets");
    const fs::path exe = exe_dir();
    if (!exe.empty()) {
        dirs.push_back(exe / "presets");
        dirs.push_back(exe.parent_path() / "presets");
    }
    return dirs;
}

// Accepts a path to a scenario file or the id of a bundled preset.
fs::path resolve_scenario(const std::string& arg) {
    if (fs::exists(arg))
        return arg;
    for (const fs::path& dir : preset_dirs()) {
        const fs::path with_ext = dir / (arg + ".json");
        if (fs::exists(with_ext))
            return with_ext;
        const fs::path bare = dir / arg;
        if (fs::exists(bare))
            return bare;
    }
    throw std::runtime_error("cli: scenario file or preset '" + arg + "' not found");
}

std::string sanitize_dir_name(const std::string& name) {
    std::string out;
    for (char c : name)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' ||
                              c == '-'
                          ? c
                          : '_');
    return out.empty() ? std::string("run") : out;
}

// Error messages carry a "module:" prefix by convention; surface it as a type tag.
std::string error_type(const std::string& message) {
    const std::size_t colon = message.find(':');
    if (colon == std::string::npos || colon == 0)
        return "runtime";
    for (std::size_t i = 0; i < colon; ++i) {
        const char c = message[i];
        if (!std::islower(static_cast<unsigned char>(c)) && c != '_')
            return "runtime";
    }
    return message.substr(0, colon);
}

int list_presets() {
    std::map<std::string, fs::path> found;
    for (const fs::path& dir : preset_dirs()) {
        std::error_code ec;
        if (!fs::is_directory(dir, ec))
            continue;
        for (const auto& entry : fs::directory_iterator(dir, ec)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".json")
                continue;
            found.emplace(entry.path().stem().string(), entry.path());
        }
    }
    if (found.empty()) {
        std::cout << "no presets found (searched AFC_SIM_PRESETS, ./presets, exe-relative "
                     "presets)\n";
        return 0;
    }
    for (const auto& [id, path] : found) {
        try {
            const afc::Scenario sc = afc::load_scenario(path.string());
            std::printf("%-22s %-13s %s\n", id.c_str(), afc::to_string(sc.kind).c_str(),
                        sc.description.empty() ? sc.name.c_str() : sc.description.c_str());
        } catch (const std::exception& e) {
            std::printf("%-22s %-13s invalid: %s\n", id.c_str(), "-", e.what());
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"atomic frequency comb photon-echo memory simulator"};
    app.require_subcommand(1);

    std::string run_arg;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    CLI::App* run_cmd = app.add_subcommand("run", "run a scenario and write result artifacts");
    run_cmd->add_option("scenario", run_arg, "scenario file or preset id")->required();
    run_cmd->add_option("--out", out_dir, "output directory (default: derived from scenario name)");
    CLI::Option* seed_opt = run_cmd->add_option("--seed", seed, "override the master seed");
    run_cmd->add_option("--workers", workers, "worker threads for scan points")
        ->check(CLI::PositiveNumber);

    std::string validate_arg;
    CLI::App* validate_cmd =
        app.add_subcommand("validate", "parse a scenario and report whether it is well formed");
    validate_cmd->add_option("scenario", validate_arg, "scenario file or preset id")->required();

    CLI::App* presets_cmd = app.add_subcommand("presets", "work with bundled preset scenarios");
    presets_cmd->require_subcommand(1);
    CLI::App* list_cmd = presets_cmd->add_subcommand("list", "list available presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        nlohmann::ordered_json err;
        err["error"] = {{"type", "usage"}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 2;
    }

    try {
        if (run_cmd->parsed()) {
            const fs::path path = resolve_scenario(run_arg);
            const afc::Scenario sc = afc::load_scenario(path.string());
            afc::RunnerOptions options;
            options.out_dir = out_dir.empty() ? sanitize_dir_name(sc.name) : out_dir;
            options.has_seed_override = seed_opt->count() > 0;
            options.seed_override = seed;
            options.workers = workers;
            const std::string line = afc::run_scenario(sc, options);
            std::cout << sc.name << ": " << line << " -> " << options.out_dir << "\n";
            return 0;
        }
        if (validate_cmd->parsed()) {
            const fs::path path = resolve_scenario(validate_arg);
            const afc::Scenario sc = afc::load_scenario(path.string());
            std::cout << "ok: " << sc.name << " (" << afc::to_string(sc.kind) << ")\n";
            return 0;
        }
        if (list_cmd->parsed())
            return list_presets();
    } catch (const std::exception& e) {
        nlohmann::ordered_json err;
        err["error"] = {{"type", error_type(e.what())}, {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
