// Copyright 2026 The cascade-kv Authors
// SPDX-License-Identifier: Apache-2.0

// cascade_kv command line: simulate, verify, bench, viz, span.

#include <yaml-cpp/yaml.h>

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cascade_kv/bench.hpp"
#include "cascade_kv/verification.hpp"

namespace fs = std::filesystem;
using namespace cascade_kv;

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    bool strict = false;
    bool inject_fault = false;
    std::string trace_path;
};

template <class T>
T get(const YAML::Node& node, const char* key, T fallback) {
    if (!node || !node[key]) return fallback;
    return node[key].as<T>();
}

CascadeConfig read_cache(const YAML::Node& n, CascadeConfig c = {}) {
    c.total_capacity = get(n, "capacity", c.total_capacity);
    c.num_cascades = get(n, "cascades", c.num_cascades);
    c.sink_size = get(n, "sink", c.sink_size);
    c.ema_gamma = get(n, "gamma", c.ema_gamma);
    c.selection_enabled = get(n, "selection", c.selection_enabled);
    if (n && n["head_policy"]) c.head_policy = head_policy_from_string(n["head_policy"].as<std::string>());
    if (n && n["head_reduction"]) c.head_reduction = head_reduction_from_string(n["head_reduction"].as<std::string>());
    c.validate();
    return c;
}

std::vector<PolicyKind> read_policies(const YAML::Node& n, std::vector<PolicyKind> fallback) {
    if (!n) return fallback;
    std::vector<PolicyKind> out;
    for (const auto& p : n) out.push_back(policy_from_string(p.as<std::string>()));
    return out;
}

YAML::Node load(const Options& o) {
    if (o.config_path.empty()) return YAML::Node(YAML::NodeType::Map);
    return YAML::LoadFile(o.config_path);
}

std::ofstream open_out(const Options& o, const std::string& name, bool binary = false) {
    fs::create_directories(o.out_dir);
    const fs::path path = fs::path(o.out_dir) / name;
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out | std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return os;
}

void close_checked(std::ofstream& os, const std::string& name) {
    os.close();
    if (!os) throw std::runtime_error("write failed: " + name);
}

int cmd_simulate(const Options& o) {
    const YAML::Node root = load(o);
    const YAML::Node sim = root["simulate"];
    CascadeConfig base = read_cache(root["cache"]);
    RetentionGridConfig grid;
    grid.base = base;
    grid.context = get<std::size_t>(sim, "context", 522240);
    grid.spacing = get<std::size_t>(sim, "spacing", 34816);
    grid.heavy_weight = get(sim, "heavy_weight", 1e6);
    grid.seeds = get<std::size_t>(sim, "seeds", 100);
    grid.first_seed = o.seed.value_or(get<std::uint64_t>(sim, "seed", 0));
    std::vector<std::size_t> ns{1, 2, 4, 8, 16};
    if (sim && sim["cascades"]) ns = sim["cascades"].as<std::vector<std::size_t>>();
    const auto policies = read_policies(sim ? sim["policies"] : YAML::Node{},
                                        {PolicyKind::streaming_llm_sink, PolicyKind::cascade_no_selection,
                                         PolicyKind::cascade_full});

    auto rows = open_out(o, "retention.csv");
    auto summary = open_out(o, "summary.csv");
    RetentionReport::write_csv_header(rows);
    summary << "policy,N,capacity,context,span,seeds,marks,retention,expected_accuracy\n";
    std::set<std::pair<PolicyKind, std::size_t>> done;
    for (PolicyKind policy : policies) {
        for (std::size_t n : ns) {
            RetentionGridConfig cfg = grid;
            cfg.base.num_cascades = n;
            const CascadeConfig effective = policy_config(policy, cfg.base);
            if (!done.emplace(policy, effective.num_cascades).second) continue;
            const auto reports = retention_reports(policy, cfg);
            for (const auto& r : reports) r.write_csv_rows(rows);
            const auto p = summarize_retention(policy, cfg, reports);
            char line[256];
            std::snprintf(line, sizeof line, "%s,%zu,%zu,%zu,%llu,%zu,%zu,%.6f,%.6f\n",
                          std::string(to_string(policy)).c_str(), p.num_cascades, p.capacity, p.context,
                          static_cast<unsigned long long>(p.span), p.seeds, p.marks, p.retention,
                          p.expected_accuracy);
            summary << line;
            std::cout << line << std::flush;
        }
    }
    close_checked(rows, "retention.csv");
    close_checked(summary, "summary.csv");
    return 0;
}

int cmd_verify(const Options& o) {
    verify::VerifyOptions vo;
    vo.strict = o.strict;
    vo.inject_fault = o.inject_fault;
    vo.seed = o.seed.value_or(get<std::uint64_t>(load(o)["verify"], "seed", 0));
    bool all = true;
    for (const auto& r : verify::run_all(vo)) {
        all = all && r.passed;
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " [tolerance: " << r.tolerance
                  << "] measured " << verify::format_double(r.measured) << "; " << r.detail << '\n';
    }
    return all ? 0 : 1;
}

int cmd_bench(const Options& o) {
    const YAML::Node root = load(o);
    const YAML::Node ops = root["bench"]["ops"];
    const YAML::Node pre = root["bench"]["prefill"];
    const std::uint64_t seed = o.seed.value_or(get<std::uint64_t>(root["bench"], "seed", 0));

    CacheOpBenchConfig oc;
    oc.tokens = get(ops, "tokens", oc.tokens);
    oc.capacity = get(ops, "capacity", oc.capacity);
    oc.sink = get(ops, "sink", oc.sink);
    oc.width = get(ops, "width", oc.width);
    oc.warmup = get(ops, "warmup", oc.warmup);
    oc.runs = get(ops, "runs", oc.runs);
    oc.seed = seed;

    PrefillBenchConfig pc;
    pc.seq_len = get(pre, "seq_len", pc.seq_len);
    if (pre && pre["strides"]) pc.strides = pre["strides"].as<std::vector<std::size_t>>();
    CascadeConfig cache;
    cache.total_capacity = 16384;
    pc.cache = read_cache(pre, cache);
    pc.attn = AttentionParams::make(get<std::size_t>(pre, "dim", 32), get<std::size_t>(pre, "heads", 1),
                                    get<std::size_t>(pre, "kv_heads", 1));
    pc.layers = get(pre, "layers", pc.layers);
    pc.warmup = get<std::size_t>(pre, "warmup", 0);
    pc.runs = get<std::size_t>(pre, "runs", 5);
    pc.seed = seed;

    auto os = open_out(o, "bench.csv");
    os << "benchmark,variant,param,median_s,q1_s,q3_s,iqr_s,runs\n";
    auto row = [&](const std::string& bench, const std::string& variant, std::size_t param, const TimingSummary& t) {
        char line[256];
        std::snprintf(line, sizeof line, "%s,%s,%zu,%.9f,%.9f,%.9f,%.9f,%zu\n", bench.c_str(), variant.c_str(), param,
                      t.median, t.q1, t.q3, t.iqr(), t.runs);
        os << line;
        std::cout << line << std::flush;
    };
    row("cache_ops", "ring_n1", oc.tokens, bench_ring_adds(oc, 1));
    row("cache_ops", "ring_n4", oc.tokens, bench_ring_adds(oc, 4));
    row("cache_ops", "concat", oc.tokens, bench_concat_adds(oc));
    for (std::size_t cap : {std::size_t{16}, std::size_t{16384}}) {
        std::vector<double> per_op;
        for (std::size_t r = 0; r < oc.runs; ++r) per_op.push_back(ring_push_ns(cap, oc.width, 1u << 20, 1) * 1e-9);
        row("ring_push_per_op", "capacity", cap, summarize(per_op));
    }
    for (const auto& t : bench_prefill(pc)) row("prefill", "stride", t.stride, t.seconds);
    close_checked(os, "bench.csv");
    return 0;
}

void write_pgm(const Options& o, const std::string& name, const Matrix<std::uint8_t>& mask) {
    auto os = open_out(o, name, true);
    os << "P5\n" << mask.cols() << ' ' << mask.rows() << "\n255\n";
    std::vector<char> row(mask.cols());
    for (std::size_t i = 0; i < mask.rows(); ++i) {
        for (std::size_t j = 0; j < mask.cols(); ++j) row[j] = mask(i, j) != 0 ? static_cast<char>(255) : 0;
        os.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
    close_checked(os, name);
}

void write_mask_csv(const Options& o, const std::string& name, const Matrix<std::uint8_t>& mask) {
    auto os = open_out(o, name);
    std::string line;
    for (std::size_t j = 0; j < mask.cols(); ++j) line += (j ? ",c" : "c") + std::to_string(j);
    os << line << '\n';
    for (std::size_t i = 0; i < mask.rows(); ++i) {
        line.clear();
        for (std::size_t j = 0; j < mask.cols(); ++j) {
            if (j) line += ',';
            line += mask(i, j) != 0 ? '1' : '0';
        }
        os << line << '\n';
    }
    close_checked(os, name);
}

int cmd_viz(const Options& o) {
    const YAML::Node root = load(o);
    const YAML::Node viz = root["viz"];
    std::vector<std::size_t> strides{1};
    if (viz && viz["strides"]) strides = viz["strides"].as<std::vector<std::size_t>>();
    const std::string trace_path = o.trace_path.empty() ? get<std::string>(viz, "trace", "") : o.trace_path;

    // Masks are reconstructed fully before any file is opened.
    std::vector<std::pair<std::string, Matrix<std::uint8_t>>> masks;
    std::vector<std::pair<std::string, EvictionTrace>> traces;
    if (!trace_path.empty()) {
        std::ifstream is(trace_path, std::ios::binary);
        if (!is) throw std::runtime_error("cannot read trace " + trace_path);
        EvictionTrace trace = EvictionTrace::read_csv(is);
        if (trace.empty()) throw IncompleteTraceError("viz: trace " + trace_path + " has no events");
        std::size_t len = get<std::size_t>(viz, "seq_len", 0);
        if (len == 0) {
            for (const auto& e : trace.events()) len = std::max(len, static_cast<std::size_t>(e.origin_pos) + 1);
        }
        const std::string stem = fs::path(trace_path).stem().string();
        for (std::size_t stride : strides) {
            masks.emplace_back(stem + "_stride" + std::to_string(stride), reconstruct_mask(trace, len, stride));
        }
    } else {
        CascadeConfig base;
        base.total_capacity = 2048;
        base.num_cascades = 4;
        base = read_cache(root["cache"], base);
        const std::size_t len = get<std::size_t>(viz, "seq_len", 8192);
        const SyntheticStream stream{len, ScoreProfile::uniform_random(), o.seed.value_or(get<std::uint64_t>(viz, "seed", 0))};
        const auto policies = read_policies(viz ? viz["policies"] : YAML::Node{},
                                            {PolicyKind::streaming_llm_sink, PolicyKind::cascade_full});
        for (PolicyKind policy : policies) {
            EvictionTrace trace;
            run_retention(policy, base, stream, &trace);
            const std::string stem = std::string(to_string(policy));
            for (std::size_t stride : strides) {
                masks.emplace_back(stem + "_stride" + std::to_string(stride), reconstruct_mask(trace, len, stride));
            }
            traces.emplace_back(stem, std::move(trace));
        }
    }
    for (const auto& [stem, trace] : traces) {
        auto os = open_out(o, "trace_" + stem + ".csv");
        trace.write_csv(os);
        close_checked(os, stem);
    }
    for (const auto& [stem, mask] : masks) {
        write_pgm(o, "mask_" + stem + ".pgm", mask);
        write_mask_csv(o, "mask_" + stem + ".csv", mask);
        std::cout << "wrote " << (fs::path(o.out_dir) / ("mask_" + stem + ".pgm")).string() << '\n';
    }
    return 0;
}

int cmd_span(const Options& o) {
    const YAML::Node root = load(o);
    const YAML::Node sp = root["span"];
    std::vector<std::size_t> caps{1024, 2048, 4096};
    std::vector<std::size_t> ns{1, 2, 4, 8, 16};
    if (sp && sp["capacities"]) caps = sp["capacities"].as<std::vector<std::size_t>>();
    if (sp && sp["cascades"]) ns = sp["cascades"].as<std::vector<std::size_t>>();
    const auto context = get<std::uint64_t>(sp, "context", 65536);

    auto os = open_out(o, "span.csv");
    os << "capacity,N,span,context,overall_sparsity,window_sparsity,expected_accuracy\n";
    std::printf("%10s %4s %12s %10s %10s %10s %10s\n", "capacity", "N", "span", "context", "overall", "window",
                "accuracy");
    for (std::size_t cap : caps) {
        for (std::size_t n : ns) {
            CascadeConfig c;
            c.total_capacity = cap;
            c.num_cascades = n;
            if (cap % n != 0) continue;
            const auto span = token_span(c);
            const auto s = sparsity(c, context);
            const double acc = expected_retrieval_accuracy(span, context);
            char line[256];
            std::snprintf(line, sizeof line, "%zu,%zu,%llu,%llu,%.6f,%.6f,%.6f\n", cap, n,
                          static_cast<unsigned long long>(span), static_cast<unsigned long long>(context), s.overall,
                          s.window, acc);
            os << line;
            std::printf("%10zu %4zu %12llu %10llu %10.4f %10.4f %10.4f\n", cap, n, static_cast<unsigned long long>(span),
                        static_cast<unsigned long long>(context), s.overall, s.window, acc);
        }
    }
    close_checked(os, "span.csv");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cascading KV cache simulator and verification harness"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "YAML configuration file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "base random seed");
        sub->add_option("--out", o.out_dir, "output directory");
        sub->add_flag("--strict", o.strict, "double-precision tolerances");
    };
    auto* simulate = app.add_subcommand("simulate", "retention grid over policies and cascade counts");
    auto* verify_cmd = app.add_subcommand("verify", "run every oracle-equivalence check");
    auto* bench = app.add_subcommand("bench", "cache-op and prefill latency");
    auto* viz = app.add_subcommand("viz", "reconstruct attention masks from eviction traces");
    auto* span = app.add_subcommand("span", "token span and sparsity table");
    for (auto* s : {simulate, verify_cmd, bench, viz, span}) add_common(s);
    verify_cmd->add_flag("--inject-fault", o.inject_fault)->group("");
    viz->add_option("--trace", o.trace_path, "eviction trace CSV to render");

    CLI11_PARSE(app, argc, argv);
    for (auto* s : {simulate, verify_cmd, bench, viz, span}) {
        if (s->count("--seed") > 0) o.seed = seed;
    }
    try {
        if (*simulate) return cmd_simulate(o);
        if (*verify_cmd) return cmd_verify(o);
        if (*bench) return cmd_bench(o);
        if (*viz) return cmd_viz(o);
        if (*span) return cmd_span(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
