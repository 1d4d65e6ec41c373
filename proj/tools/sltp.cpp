// Command-line front end for the sLTP pipeline.
#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "sltp/config.hpp"
#include "sltp/parallel.hpp"
#include "sltp/pipeline.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
    std::optional<double> lambda;
    std::optional<int> beta2;
    std::optional<int> n_ltp;
    std::optional<double> eta;
    std::optional<double> lt;
    std::vector<std::string> set;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--threads", o.threads, "worker threads (default: SLTP_THREADS or 1)");
    cmd->add_option("--out-dir", o.out_dir, "output directory");
    cmd->add_option("--lambda", o.lambda, "fixed lambda; skips tuning");
    cmd->add_option("--beta2", o.beta2, "SURS samples per stack");
    cmd->add_option("--n-ltp", o.n_ltp, "initial LTP count");
    cmd->add_option("--eta", o.eta, "replacement-ratio threshold");
    cmd->add_option("--lt", o.lt, "homogeneity bound for lambda tuning");
    cmd->add_option("--set", o.set, "extra key=value overrides")->type_name("KEY=VALUE");
}

sltp::PipelineConfig resolve(const Overrides& o) {
    sltp::PipelineConfig c;
    c.threads = sltp::default_threads();
    if (!o.config.empty()) c = sltp::load_config(o.config, c);
    for (const auto& kv : o.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects KEY=VALUE, got " + kv);
        sltp::set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) c.seed = *o.seed;
    if (o.threads) c.threads = *o.threads;
    if (o.out_dir) c.out_dir = *o.out_dir;
    if (o.lambda) c.lambda = *o.lambda;
    if (o.beta2) c.beta2 = *o.beta2;
    if (o.n_ltp) c.n_ltp = *o.n_ltp;
    if (o.eta) c.eta = *o.eta;
    if (o.lt) c.lt = *o.lt;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatially-informed lung texture pattern discovery"};
    app.require_subcommand(1);

    Overrides o;
    std::string last;
    const std::vector<std::pair<std::string, std::string>> stages{
        {"pdm", "pdcm"},         {"pdcm", "pdcm"},   {"project", "pdcm"}, {"sample", "sample"},
        {"textons", "textons"},  {"ltp", "ltp"},     {"sltp", "sltp"},    {"label", "label"},
        {"density", "density"},  {"eval", "eval"},   {"run-all", "eval"}};
    for (const auto& [name, stage] : stages) {
        auto* cmd = app.add_subcommand(name, "run the pipeline through the " + stage + " stage");
        add_common(cmd, o);
        cmd->callback([&last, s = stage] { last = s; });
    }

    int index = 0, count = 1;
    std::string phantom_dir;
    auto* ph = app.add_subcommand("phantom", "write synthetic phantom volumes");
    add_common(ph, o);
    ph->add_option("--index", index, "first phantom index")->check(CLI::NonNegativeNumber);
    ph->add_option("--count", count, "number of phantoms")->check(CLI::PositiveNumber);
    ph->add_option("dir", phantom_dir, "destination directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        auto c = resolve(o);
        if (ph->parsed()) {
            for (int i = index; i < index + count; ++i) sltp::write_phantom(c, i, phantom_dir);
            return 0;
        }
        sltp::run_pipeline(c, sltp::parse_stage(last), std::clog);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
