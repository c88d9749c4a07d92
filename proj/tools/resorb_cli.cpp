#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include "resorb/errors.hpp"
#include "resorb/harness.hpp"

namespace {

int usage(const char* argv0) {
    std::fprintf(stderr,
                 "usage: %s <command> --config <path> [--threads <n>] [--out <dir>]\n"
                 "\n"
                 "commands:\n"
                 "  propagate         averaged long-term propagation: series + events CSV\n"
                 "  compare           long-term series plus full-model ensemble mean/std\n"
                 "  crossings         all critical points of the distance, per planet\n"
                 "  coeffs            secular term per planet and resonant harmonics\n"
                 "  diagnose          kernel average, partial sums, and jump profiles\n"
                 "  config-reference  print every recognized key with its default\n",
                 argv0);
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) return usage(argv[0]);
    std::string command = argv[1];
    std::string config_path, out_dir;
    int threads = -1;
    for (int i = 2; i < argc; ++i) {
        std::string flag = argv[i];
        auto value = [&]() -> const char* {
            if (i + 1 >= argc) {
                std::fprintf(stderr, "%s: missing value for %s\n", argv[0], flag.c_str());
                std::exit(2);
            }
            return argv[++i];
        };
        if (flag == "--config") {
            config_path = value();
        } else if (flag == "--threads") {
            threads = std::atoi(value());
            if (threads < 0) {
                std::fprintf(stderr, "%s: --threads must be >= 0\n", argv[0]);
                return 2;
            }
        } else if (flag == "--out") {
            out_dir = value();
        } else {
            std::fprintf(stderr, "%s: unknown flag %s\n", argv[0], flag.c_str());
            return usage(argv[0]);
        }
    }

    if (command == "config-reference") {
        std::fputs(resorb::config_reference_text().c_str(), stdout);
        return 0;
    }

    using Runner = void (*)(resorb::RunConfig&, const std::string&);
    Runner runner = nullptr;
    if (command == "propagate") runner = resorb::run_propagate;
    else if (command == "compare") runner = resorb::run_compare;
    else if (command == "crossings") runner = resorb::run_crossings;
    else if (command == "coeffs") runner = resorb::run_coeffs;
    else if (command == "diagnose") runner = resorb::run_diagnose;
    if (!runner) {
        std::fprintf(stderr, "%s: unknown command '%s'\n", argv[0], command.c_str());
        return usage(argv[0]);
    }
    if (config_path.empty()) {
        std::fprintf(stderr, "%s: %s requires --config <path>\n", argv[0],
                     command.c_str());
        return 2;
    }

    try {
        resorb::RunConfig rc = resorb::load_run_config(config_path);
        if (threads >= 0) rc.threads = threads;
        runner(rc, out_dir);
    } catch (const resorb::ConfigError& e) {
        std::fprintf(stderr, "%s: config error: %s\n", argv[0], e.what());
        return 1;
    } catch (const resorb::ParseError& e) {
        if (e.line > 0)
            std::fprintf(stderr, "%s: parse error (line %d): %s\n", argv[0], e.line,
                         e.what());
        else
            std::fprintf(stderr, "%s: parse error: %s\n", argv[0], e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s: error: %s\n", argv[0], e.what());
        return 1;
    }
    return 0;
}
