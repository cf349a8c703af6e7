#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "npcsh/error.hpp"
#include "npcsh/shell.hpp"

namespace {

npcsh::CancelFlag* g_cancel = nullptr;

void handle_sigint(int) {
    if (g_cancel) g_cancel->store(true);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"npcsh - talk to a team of NPCs and their Jinx tools"};

    std::string team_dir;
    std::string command;
    npcsh::ShellConfig config;
    config.provider = "ollama";

    app.add_option("team-dir", team_dir, "Team directory (default: bundled team)");
    app.add_option("--model", config.model, "Default model id");
    app.add_option("--provider", config.provider, "Provider id (default: ollama)");
    app.add_option("--verbosity", config.verbosity, "0 = answers only, 1 = routing, 2 = steps");
    app.add_option("-c", command, "Run one line non-interactively and exit");

    CLI11_PARSE(app, argc, argv);
    config.team_dir = team_dir;

    try {
        npcsh::Shell shell(config);

        if (!command.empty()) {
            return shell.run_once(command, std::cout);
        }

        g_cancel = &shell.cancel_flag();
        struct sigaction action {};
        action.sa_handler = handle_sigint;
        sigaction(SIGINT, &action, nullptr);

        return shell.run_interactive(std::cin, std::cout);
    } catch (const npcsh::Error& e) {
        std::cerr << "npcsh: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "npcsh: " << e.what() << "\n";
        return 1;
    }
}
