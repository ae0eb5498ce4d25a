// Command-line front end: preload generation, single runs, candidate sweeps,
// roofline extraction, and numerical verification.
//
// Exit codes: 0 success, 1 internal error, 2 invalid input,
// 3 SPM capacity exceeded, 4 verification failure.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <tilesim/analysis.hpp>
#include <tilesim/engine.hpp>
#include <tilesim/layout.hpp>
#include <tilesim/matrix.hpp>
#include <tilesim/program.hpp>
#include <tilesim/schedule.hpp>

namespace {

using namespace tilesim;

constexpr int kExitInternal = 1;
constexpr int kExitInvalidInput = 2;
constexpr int kExitSpmOverflow = 3;
constexpr int kExitVerifyFailed = 4;

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write " + path);
    out << text;
}

Matrix read_raw_matrix(const std::string& path, std::uint64_t rows, std::uint64_t cols) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoFailure("cannot open " + path);
    const std::uint64_t size = static_cast<std::uint64_t>(in.tellg());
    if (size != rows * cols * 8) {
        throw SizeMismatch(path + " holds " + std::to_string(size) + " bytes, expected " +
                           std::to_string(rows * cols * 8) + " for " + std::to_string(rows) +
                           "x" + std::to_string(cols) + " doubles");
    }
    in.seekg(0);
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(size));
    if (!in) throw IoFailure("short read from " + path);
    return m;
}

struct PreloadArgs {
    std::string arch_path, schedule_path, out_dir;
    std::string a_path, b_path;
    std::uint64_t seed = 1;
    bool integer_values = false;
};

int cmd_preload(const PreloadArgs& args) {
    const ArchConfig arch = load_config_file(args.arch_path);
    const SchedulePlan plan = parse_schedule_file(args.schedule_path, arch);

    std::map<std::string, Matrix> matrices;
    matrices["A"] = args.a_path.empty()
                        ? random_matrix(plan.shape.m, plan.shape.k, args.seed, args.integer_values)
                        : read_raw_matrix(args.a_path, plan.shape.m, plan.shape.k);
    matrices["B"] = args.b_path.empty()
                        ? random_matrix(plan.shape.k, plan.shape.n, args.seed + 1,
                                        args.integer_values)
                        : read_raw_matrix(args.b_path, plan.shape.k, plan.shape.n);

    std::map<std::string, LayoutDesc> layouts;
    layouts["A"] = plan.layouts.at("A");
    layouts["B"] = plan.layouts.at("B");
    write_preload(matrices, layouts, args.out_dir);
    std::cout << (std::filesystem::path(args.out_dir) / "preload.manifest").string() << "\n";
    return 0;
}

struct RunArgs {
    std::string arch_path, schedule_path, preload_path;
    std::string trace_path, out_path, label;
    bool run_verify = false;
};

int cmd_run(const RunArgs& args) {
    const ArchConfig arch = load_config_file(args.arch_path);
    const SchedulePlan plan = parse_schedule_file(args.schedule_path, arch);
    const Preload preload = read_preload(args.preload_path);
    const BspProgram program = gen_program(plan, arch);

    ExecOptions options;
    options.collect_trace = !args.trace_path.empty();
    const ExecResult result = execute(program, arch, preload, options);

    const std::string label =
        args.label.empty() ? std::filesystem::path(args.schedule_path).stem().string()
                           : args.label;
    write_text(args.out_path, emit_report({{label, result.report}}, arch));
    if (!args.trace_path.empty()) {
        write_text(args.trace_path, trace_to_csv(result.trace));
    }

    if (args.run_verify) {
        const VerifyResult v =
            verify(result.c, preload.matrices.at("A"), preload.matrices.at("B"));
        std::cout << "verify: " << (v.pass ? "PASS" : "FAIL")
                  << " max_abs_err=" << v.max_abs_err << "\n";
        if (!v.pass) return kExitVerifyFailed;
    }
    return 0;
}

struct SweepArgs {
    std::string arch_path, candidates_path, preload_path, out_path;
    unsigned jobs = 0;
    bool roofline_output = false;
};

struct CandidateOutcome {
    bool ok = false;
    std::string label;
    std::string reason;
    SimReport report;
};

int cmd_sweep(const SweepArgs& args) {
    const ArchConfig arch = load_config_file(args.arch_path);
    const Preload preload = read_preload(args.preload_path);

    std::ifstream in(args.candidates_path);
    if (!in) throw IoFailure("cannot open candidates file: " + args.candidates_path);
    const std::filesystem::path base = std::filesystem::path(args.candidates_path).parent_path();
    std::vector<std::string> paths;
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream token(line);
        std::string path;
        if (token >> path) {
            paths.push_back((base / path).string());
        }
    }
    if (paths.empty()) {
        std::cerr << "no candidates listed\n";
        return kExitInvalidInput;
    }

    // Share-nothing fan-out: every candidate simulation owns its state and
    // only reads the shared arch and preload; outcomes merge in list order.
    std::vector<CandidateOutcome> outcomes(paths.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= paths.size()) return;
            CandidateOutcome& out = outcomes[i];
            out.label = std::filesystem::path(paths[i]).stem().string();
            try {
                const SchedulePlan plan = parse_schedule_file(paths[i], arch);
                const BspProgram program = gen_program(plan, arch);
                out.report = execute(program, arch, preload).report;
                out.ok = true;
            } catch (const std::exception& e) {
                out.reason = e.what();
            }
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned jobs = std::min<std::size_t>(args.jobs == 0 ? hw : args.jobs, paths.size());
    std::vector<std::thread> threads;
    for (unsigned i = 0; i < jobs; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();

    std::vector<std::pair<std::string, SimReport>> table;
    std::ostringstream skipped;
    for (const CandidateOutcome& out : outcomes) {
        if (out.ok) {
            table.emplace_back(out.label, out.report);
        } else {
            skipped << "# skipped: " << out.label << ": " << out.reason << "\n";
        }
    }
    if (table.empty()) {
        std::cerr << "no valid candidates\n" << skipped.str();
        return kExitInvalidInput;
    }
    std::stable_sort(table.begin(), table.end(), [](const auto& x, const auto& y) {
        return x.second.total_cycles < y.second.total_cycles;
    });

    std::string text = args.roofline_output ? emit_roofline(table, arch)
                                            : emit_report(table, arch);
    text += skipped.str();
    text += "# best=" + table.front().first + "\n";
    write_text(args.out_path, text);
    return 0;
}

struct VerifyArgs {
    std::string arch_path, schedule_path, preload_path;
};

int cmd_verify(const VerifyArgs& args) {
    const ArchConfig arch = load_config_file(args.arch_path);
    const SchedulePlan plan = parse_schedule_file(args.schedule_path, arch);
    const Preload preload = read_preload(args.preload_path);
    const BspProgram program = gen_program(plan, arch);
    const ExecResult result = execute(program, arch, preload);
    const VerifyResult v = verify(result.c, preload.matrices.at("A"), preload.matrices.at("B"));
    std::cout << "verify: " << (v.pass ? "PASS" : "FAIL") << " max_abs_err=" << v.max_abs_err
              << "\n";
    return v.pass ? 0 : kExitVerifyFailed;
}

template <typename F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const SpmOverflow& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSpmOverflow;
    } catch (const SpmOverflowAtRuntime& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSpmOverflow;
    } catch (const SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalidInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tile-grid accelerator simulator and GEMM schedule explorer"};
    app.require_subcommand(1);

    PreloadArgs preload_args;
    CLI::App* preload = app.add_subcommand("preload", "generate HBM preload files");
    preload->add_option("--arch", preload_args.arch_path, "architecture config")->required();
    preload->add_option("--schedule", preload_args.schedule_path, "schedule file")->required();
    preload->add_option("--out", preload_args.out_dir, "output directory")->required();
    preload->add_option("--seed", preload_args.seed, "random seed");
    preload->add_flag("--ints", preload_args.integer_values, "small integer values");
    preload->add_option("--a", preload_args.a_path, "raw A input (f64le row-major)");
    preload->add_option("--b", preload_args.b_path, "raw B input (f64le row-major)");

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "compile and execute one schedule");
    run->add_option("--arch", run_args.arch_path, "architecture config")->required();
    run->add_option("--schedule", run_args.schedule_path, "schedule file")->required();
    run->add_option("--preload", run_args.preload_path, "preload manifest")->required();
    run->add_option("--trace", run_args.trace_path, "write op trace CSV");
    run->add_option("--out", run_args.out_path, "report path (default stdout)");
    run->add_option("--label", run_args.label, "report row label");
    run->add_flag("--verify", run_args.run_verify, "check the result against the oracle");

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep", "run candidate schedules, rank by cycles");
    sweep->add_option("--arch", sweep_args.arch_path, "architecture config")->required();
    sweep->add_option("--candidates", sweep_args.candidates_path,
                      "file listing schedule paths, one per line")
        ->required();
    sweep->add_option("--preload", sweep_args.preload_path, "preload manifest")->required();
    sweep->add_option("--out", sweep_args.out_path, "report path (default stdout)");
    sweep->add_option("--jobs", sweep_args.jobs, "parallel candidates (default: cores)");

    SweepArgs roofline_args;
    roofline_args.roofline_output = true;
    CLI::App* roofline = app.add_subcommand("roofline", "emit (OI, achieved FLOPs) pairs");
    roofline->add_option("--arch", roofline_args.arch_path, "architecture config")->required();
    roofline->add_option("--candidates", roofline_args.candidates_path,
                         "file listing schedule paths, one per line")
        ->required();
    roofline->add_option("--preload", roofline_args.preload_path, "preload manifest")->required();
    roofline->add_option("--out", roofline_args.out_path, "output path (default stdout)");
    roofline->add_option("--jobs", roofline_args.jobs, "parallel candidates (default: cores)");

    VerifyArgs verify_args;
    CLI::App* verify_cmd = app.add_subcommand("verify", "execute and compare with the oracle");
    verify_cmd->add_option("--arch", verify_args.arch_path, "architecture config")->required();
    verify_cmd->add_option("--schedule", verify_args.schedule_path, "schedule file")->required();
    verify_cmd->add_option("--preload", verify_args.preload_path, "preload manifest")->required();

    CLI11_PARSE(app, argc, argv);

    if (preload->parsed()) return guarded([&] { return cmd_preload(preload_args); });
    if (run->parsed()) return guarded([&] { return cmd_run(run_args); });
    if (sweep->parsed()) return guarded([&] { return cmd_sweep(sweep_args); });
    if (roofline->parsed()) return guarded([&] { return cmd_sweep(roofline_args); });
    if (verify_cmd->parsed()) return guarded([&] { return cmd_verify(verify_args); });
    return kExitInternal;
}
