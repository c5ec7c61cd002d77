#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tpa/bench.hpp"
#include "tpa/cost_model.hpp"
#include "tpa/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitUsage = 2;

// Relative output paths land under $TPATTN_OUT_DIR when it is set.
std::string resolve_out_path(const std::string& path) {
    const char* dir = std::getenv("TPATTN_OUT_DIR");
    if (dir == nullptr || path.empty() || path.front() == '/') return path;
    std::string full(dir);
    if (!full.empty() && full.back() != '/') full += '/';
    return full + path;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    const std::string resolved = resolve_out_path(path);
    std::ofstream out(resolved, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + resolved);
    }
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_verify_cmd(const tpa::VerifyOptions& opts, const std::string& report_path) {
    const auto results = tpa::run_verify(opts);
    std::size_t failed = 0;
    for (const auto& r : results) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.suite << "." << r.name;
        if (!r.passed && !r.detail.empty()) std::cout << "  (" << r.detail << ")";
        std::cout << "\n";
        if (!r.passed) ++failed;
    }
    std::cout << results.size() - failed << "/" << results.size() << " properties passed\n";
    if (!report_path.empty()) {
        write_output(report_path, tpa::verify_report_json(results));
    }
    return failed == 0 ? kExitOk : kExitPropertyFailure;
}

std::string pretty_table(const std::vector<tpa::MechanismSpec>& specs) {
    std::ostringstream out;
    out << std::left << std::setw(14) << "kind" << std::right << std::setw(14) << "params"
        << std::setw(12) << "kv/token" << std::setw(16) << "proj_flops" << std::setw(12)
        << "attn_coeff" << "\n";
    for (const auto& s : specs) {
        const auto f = tpa::decode_flops(s);
        out << std::left << std::setw(14) << tpa::to_string(s.kind) << std::right << std::setw(14)
            << tpa::attention_params(s) << std::setw(12) << tpa::kv_cache_numbers_per_token(s)
            << std::setw(16) << f.projection << std::setw(12) << f.attention_per_token_coeff
            << "\n";
    }
    return out.str();
}

tpa::BenchPlan plan_from_json(const nlohmann::json& j) {
    tpa::BenchPlan plan;
    if (j.contains("mechanisms")) plan.mechanisms = j["mechanisms"].get<std::vector<std::string>>();
    if (j.contains("batch_sizes")) plan.batch_sizes = j["batch_sizes"].get<std::vector<std::size_t>>();
    if (j.contains("d_models")) plan.d_models = j["d_models"].get<std::vector<std::size_t>>();
    if (j.contains("head_dim")) plan.head_dim = j["head_dim"].get<std::size_t>();
    if (j.contains("rank_q")) plan.rank_q = j["rank_q"].get<std::size_t>();
    if (j.contains("rank_k")) plan.rank_k = j["rank_k"].get<std::size_t>();
    if (j.contains("rank_v")) plan.rank_v = j["rank_v"].get<std::size_t>();
    if (j.contains("seqlens")) plan.seqlens = j["seqlens"].get<std::vector<std::size_t>>();
    if (j.contains("repetitions")) plan.repetitions = j["repetitions"].get<std::size_t>();
    if (j.contains("warmup")) plan.warmup = j["warmup"].get<std::size_t>();
    if (j.contains("seed")) plan.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) plan.threads = j["threads"].get<std::size_t>();
    if (j.contains("block_size")) plan.block_size = j["block_size"].get<std::size_t>();
    if (j.contains("byte_budget")) plan.byte_budget = j["byte_budget"].get<std::size_t>();
    return plan;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tensor product attention toolkit"};
    app.require_subcommand(1);

    // verify
    auto* verify = app.add_subcommand("verify", "run module invariant suites");
    tpa::VerifyOptions vopts;
    std::string report_path;
    verify->add_option("--seed", vopts.seed, "seed for randomized fixtures")->required();
    verify->add_option("--suite", vopts.filter, "only suites whose name contains this");
    verify->add_option("--report", report_path, "write a JSON report here");
    verify->add_option("--inject-fault", vopts.inject_fault,
                       "perturbation fixture name (for harness self-tests)");

    // calc
    auto* calc = app.add_subcommand("calc", "cost-model table for a JSON spec list");
    std::string specs_path, calc_out, calc_format = "csv";
    calc->add_option("--specs", specs_path, "JSON array of mechanism specs")->required();
    calc->add_option("--out", calc_out, "output path (stdout when omitted)");
    calc->add_option("--format", calc_format, "csv or pretty")
        ->check(CLI::IsMember({"csv", "pretty"}));

    // bench
    auto* bench = app.add_subcommand("bench", "decode timing sweep, CSV output");
    tpa::BenchPlan plan;
    std::string plan_path, bench_out;
    std::size_t pow_min = 10, pow_max = 17;
    bench->add_option("--plan", plan_path, "JSON bench plan (flags override it)");
    bench->add_option("--mechanisms", plan.mechanisms, "tpa, mha and/or dryrun");
    bench->add_option("--batch", plan.batch_sizes, "batch sizes");
    bench->add_option("--d-model", plan.d_models, "model dims (multiples of head dim)");
    bench->add_option("--head-dim", plan.head_dim, "per-head dim");
    bench->add_option("--rank-q", plan.rank_q, "query rank");
    bench->add_option("--rank-k", plan.rank_k, "key rank");
    bench->add_option("--rank-v", plan.rank_v, "value rank");
    bench->add_option("--seqlen-pow-min", pow_min, "smallest power-of-two sequence length");
    bench->add_option("--seqlen-pow-max", pow_max, "largest power-of-two sequence length");
    bench->add_option("--reps", plan.repetitions, "timed repetitions (>= 3)");
    bench->add_option("--warmup", plan.warmup, "warmup iterations");
    bench->add_option("--seed", plan.seed, "seed for generated factors");
    bench->add_option("--threads", plan.threads, "decode worker threads");
    bench->add_option("--block-size", plan.block_size, "cache block size");
    bench->add_option("--byte-budget", plan.byte_budget, "skip rows whose cache exceeds this");
    bench->add_option("--out", bench_out, "CSV path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (verify->parsed()) {
            return run_verify_cmd(vopts, report_path);
        }
        if (calc->parsed()) {
            const auto specs = tpa::parse_specs_json(read_text_file(specs_path));
            write_output(calc_out,
                         calc_format == "csv" ? tpa::cost_table_csv(specs) : pretty_table(specs));
            return kExitOk;
        }
        if (bench->parsed()) {
            if (!plan_path.empty()) {
                // flags given on the command line win over the plan file
                const tpa::BenchPlan cli_plan = plan;
                plan = plan_from_json(nlohmann::json::parse(read_text_file(plan_path)));
                if (bench->count("--mechanisms")) plan.mechanisms = cli_plan.mechanisms;
                if (bench->count("--batch")) plan.batch_sizes = cli_plan.batch_sizes;
                if (bench->count("--d-model")) plan.d_models = cli_plan.d_models;
                if (bench->count("--head-dim")) plan.head_dim = cli_plan.head_dim;
                if (bench->count("--rank-q")) plan.rank_q = cli_plan.rank_q;
                if (bench->count("--rank-k")) plan.rank_k = cli_plan.rank_k;
                if (bench->count("--rank-v")) plan.rank_v = cli_plan.rank_v;
                if (bench->count("--reps")) plan.repetitions = cli_plan.repetitions;
                if (bench->count("--warmup")) plan.warmup = cli_plan.warmup;
                if (bench->count("--seed")) plan.seed = cli_plan.seed;
                if (bench->count("--threads")) plan.threads = cli_plan.threads;
                if (bench->count("--block-size")) plan.block_size = cli_plan.block_size;
                if (bench->count("--byte-budget")) plan.byte_budget = cli_plan.byte_budget;
            }
            if (plan.seqlens.empty()) {
                if (pow_min > pow_max) {
                    throw std::invalid_argument("--seqlen-pow-min exceeds --seqlen-pow-max");
                }
                for (std::size_t p = pow_min; p <= pow_max; ++p) {
                    plan.seqlens.push_back(std::size_t{1} << p);
                }
            }
            const auto rows = tpa::run_bench(plan);
            write_output(bench_out, tpa::bench_csv(rows));
            return kExitOk;
        }
    } catch (const nlohmann::json::parse_error& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
