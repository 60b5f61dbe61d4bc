#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "structsens/pipeline.hpp"

using namespace structsens;

namespace {

int run_experiment(Experiment experiment, const std::string& config_path, std::uint64_t* seed,
                   std::string* out_dir, int* threads) {
    try {
        RunConfig cfg = parse_config(config_path);
        cfg.experiment = experiment;
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.out_dir = *out_dir;
        if (threads) cfg.threads = *threads;
        validate_config(cfg);
        const ReportBundle bundle = run(cfg);
        std::printf("config %s seed %llu\n", bundle.config_hash.c_str(),
                    static_cast<unsigned long long>(bundle.seed));
        for (const auto& f : bundle.files) std::printf("wrote %s\n", f.c_str());
        return 0;
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const io_error& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"structural sensitivity experiments for predator-prey models"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    int threads = 0;
    bool seed_set = false, out_set = false, threads_set = false;

    app.add_option("--config", config_path, "run configuration file")->required();
    app.add_option("--seed", seed, "override the RNG seed")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--out", out_dir, "override the output directory")->each([&](const std::string&) {
        out_set = true;
    });
    app.add_option("--threads", threads, "worker threads for sweeps (or STRUCTSENS_THREADS)")
        ->each([&](const std::string&) { threads_set = true; });

    struct Sub {
        const char* name;
        const char* help;
        Experiment experiment;
    };
    const Sub subs[] = {
        {"fit", "least-squares response fitting", Experiment::fit},
        {"intersect", "response intersection points", Experiment::intersect},
        {"simulate", "integrate one trajectory", Experiment::simulate},
        {"bifurcate", "sweep a bifurcation diagram", Experiment::bifurcate},
        {"hopf", "locate the Hopf carrying capacity", Experiment::hopf},
        {"report", "full cross-response comparison", Experiment::report},
    };
    for (const Sub& sub : subs) app.add_subcommand(sub.name, sub.help)->fallthrough();

    CLI11_PARSE(app, argc, argv);

    for (const Sub& sub : subs) {
        if (app.got_subcommand(sub.name))
            return run_experiment(sub.experiment, config_path, seed_set ? &seed : nullptr,
                                  out_set ? &out_dir : nullptr, threads_set ? &threads : nullptr);
    }
    return 2;
}
