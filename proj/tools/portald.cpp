// portald: the portal daemon. `serve` runs the HTTP gateway; `repl` runs a
// text-mode desk session against the same engine.
#include <unistd.h>

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "portal/app.hpp"
#include "portal/gateway.hpp"
#include "portal/repl.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"portald - object personas behind a ritual portal"};
    cli.require_subcommand(1);

    std::string config_path;
    std::string data_dir;
    std::string listen;
    std::string log_level = "info";
    bool mock_all = false;
    bool show_inner = false;
    cli.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    cli.add_option("--data-dir", data_dir, "data directory (overrides the config)");
    cli.add_flag("--mock-all", mock_all, "use mock providers for every capability");
    cli.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

    auto* serve = cli.add_subcommand("serve", "run the HTTP gateway");
    serve->add_option("--listen", listen, "host:port (overrides the config)");
    auto* repl = cli.add_subcommand("repl", "interactive text session");
    repl->add_flag("--show-inner", show_inner, "print the object's inner thoughts");

    CLI11_PARSE(cli, argc, argv);

    // Logs go to stderr so the REPL transcript on stdout stays clean.
    auto logger = spdlog::stderr_color_mt("portal");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        portal::DaemonConfig config =
            config_path.empty() ? portal::DaemonConfig::from_json(nlohmann::json::object())
                                : portal::DaemonConfig::load(config_path);
        if (mock_all) config.set_all_mock();
        if (!data_dir.empty()) config.data_dir = data_dir;
        if (!listen.empty()) config.set_listen(listen);
        config.validate();
        spdlog::info("config: {}", config.redacted().dump());

        portal::PortalApp app(config);

        app.start_light(config.light_sample_hz);
        if (*repl) {
            portal::ReplOptions opts;
            opts.show_inner = show_inner;
            opts.prompt = isatty(STDIN_FILENO) != 0;
            return portal::run_repl(app, std::cin, std::cout, opts);
        }

        portal::Gateway gateway(app);
        gateway.start(config.listen_host, config.listen_port);
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
        spdlog::info("shutting down");
        gateway.stop();
        app.shutdown();
        return 0;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}
