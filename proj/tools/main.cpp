// hyperwalker command line: synthetic manifolds in, stores, policies, and
// evaluation tables out. Exit codes: 0 ok, 1 usage, 2 validation, 3 corruption.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hyperwalker/evaluate.hpp"
#include "hyperwalker/io.hpp"
#include "hyperwalker/trainer.hpp"

using namespace hyperwalker;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CaseSet {
    std::vector<DiagnosticCase> cases;
    std::map<std::string, std::vector<std::string>> ground_truth;
    std::map<std::string, std::string> condition;
};

void save_cases(const std::string& path, const SyntheticDataset& data) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DomainError("cannot write " + path);
    for (const auto& c : data.cases) {
        json j;
        j["case_id"] = c.case_id;
        j["subject_id"] = c.subject_id;
        j["study_id"] = c.study_id;
        j["z_img"] = c.z_img;
        j["z_ehr"] = c.z_ehr;
        auto gt = data.ground_truth.find(c.case_id);
        j["evidence"] = gt == data.ground_truth.end() ? std::vector<std::string>{} : gt->second;
        auto cond = data.case_condition.find(c.case_id);
        if (cond != data.case_condition.end()) j["condition"] = cond->second;
        f << j.dump() << '\n';
    }
}

CaseSet load_cases(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DomainError("cannot read " + path);
    CaseSet out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DomainError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        DiagnosticCase c;
        c.case_id = j.at("case_id").get<std::string>();
        c.subject_id = j.value("subject_id", "");
        c.study_id = j.value("study_id", "");
        c.z_img = j.at("z_img").get<Vec>();
        c.z_ehr = j.at("z_ehr").get<Vec>();
        if (j.contains("evidence"))
            out.ground_truth[c.case_id] = j.at("evidence").get<std::vector<std::string>>();
        if (j.contains("condition")) out.condition[c.case_id] = j.at("condition");
        out.cases.push_back(std::move(c));
    }
    return out;
}

// The 1% split defaults are calibrated for corpus scale; at workbench scale
// they would starve everything, so we fall back to the full set with a warning.
template <typename T>
std::vector<T> apply_fraction(std::vector<T> items, double frac, const std::string& what) {
    size_t keep = static_cast<size_t>(frac * static_cast<double>(items.size()));
    if (keep < 100) {
        std::cerr << "[warn] --" << what << " " << frac << " of " << items.size()
                  << " items yields " << keep << " (< 100); using all " << items.size() << "\n";
        return items;
    }
    items.resize(keep);
    return items;
}

FusionParameters load_or_init_fusion(const std::string& path, size_t dims, size_t hidden,
                                     uint64_t seed) {
    if (!path.empty()) return load_fusion(read_file(path));
    return FusionParameters::identity_init(dims, hidden, seed);
}

size_t store_dims(const HypergraphStore& store) {
    if (store.nodes().empty()) throw DomainError("store has no nodes");
    return store.nodes().begin()->second.embedding.size();
}

void log_effective(CLI::App& cmd, uint64_t seed) {
    std::cerr << "[config] " << cmd.get_name() << " seed=" << seed << "\n";
    for (const auto* opt : cmd.get_options()) {
        if (opt->get_name().empty() || opt->get_name() == "--help") continue;
        std::string v = opt->count() ? opt->results()[0]
                                     : (opt->get_default_str().empty() ? "" : opt->get_default_str());
        if (!v.empty()) std::cerr << "[config]   " << opt->get_name() << " = " << v << "\n";
    }
}

int run(int argc, char** argv) {
    CLI::App app{"hyperwalker: implicit-hypergraph evidence navigation workbench"};
    app.require_subcommand(1);
    app.fallthrough();  // let subcommands accept the global --seed/--config
    app.set_config("--config", "", "key=value config file; flags override it");

    uint64_t seed = 0;
    app.add_option("--seed", seed, "global RNG seed")->capture_default_str();

    // --- gen -------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate a planted-evidence synthetic manifold");
    std::string gen_out;
    SyntheticSpec spec;
    gen->add_option("--out", gen_out, "output directory (nodes.jsonl, cases.jsonl)")->required();
    gen->add_option("--dims", spec.dims)->capture_default_str();
    gen->add_option("--subjects", spec.n_subjects)->capture_default_str();
    gen->add_option("--studies-per-subject", spec.studies_per_subject)->capture_default_str();
    gen->add_option("--conditions", spec.n_conditions)->capture_default_str();
    gen->add_option("--spread", spec.cluster_spread, "within-condition noise")->capture_default_str();
    gen->add_option("--offset-image", spec.modality_offsets.image, "image offset scale")->capture_default_str();
    gen->add_option("--offset-report", spec.modality_offsets.report, "report offset scale")->capture_default_str();
    gen->add_option("--offset-ehr", spec.modality_offsets.ehr, "ehr offset scale")->capture_default_str();
    gen->add_option("--knowledge", spec.n_knowledge, "0 = one per condition")->capture_default_str();
    gen->add_option("--duplicate-rate", spec.duplicate_rate)->capture_default_str();
    gen->add_option("--case-fraction", spec.case_fraction)->capture_default_str();

    // --- build -----------------------------------------------------------
    auto* build = app.add_subcommand("build", "ingest JSONL nodes, prune, index, induce edges");
    std::string build_nodes, build_out, dump_edges;
    size_t build_dims = 0;
    double tau_sim = 0.8, tau_prune = 0.9, graph_frac = 0.01;
    HnswParams hnsw;
    build->add_option("--nodes", build_nodes, "node records, one JSON object per line")->required();
    build->add_option("--out", build_out, "store directory")->required();
    build->add_option("--dims", build_dims, "expected embedding length (0 = infer)")->capture_default_str();
    build->add_option("--tau-sim", tau_sim)->capture_default_str();
    build->add_option("--tau-prune", tau_prune)->capture_default_str();
    build->add_option("--graph-frac", graph_frac, "fraction of records indexed")->capture_default_str();
    build->add_option("--M", hnsw.M)->capture_default_str();
    build->add_option("--M0", hnsw.M0)->capture_default_str();
    build->add_option("--ef-construction", hnsw.ef_construction)->capture_default_str();
    build->add_option("--ef-search", hnsw.ef_search)->capture_default_str();
    build->add_option("--dump-edges", dump_edges, "also write hyperedges to this JSONL file");

    // --- train -----------------------------------------------------------
    auto* train = app.add_subcommand("train", "REINFORCE policy training");
    std::string train_store, train_cases, train_out, train_fusion, train_log;
    TrainOptions topts;
    double train_frac = 0.01;
    size_t fusion_hidden = 32;
    bool no_r_acc = false, no_r_div = false, no_budget = false, no_linger = false, no_stop = false;
    train->add_option("--store", train_store)->required();
    train->add_option("--cases", train_cases)->required();
    train->add_option("--out", train_out, "policy checkpoint path")->required();
    train->add_option("--fusion", train_fusion, "fusion checkpoint (default: identity init)");
    train->add_option("--fusion-hidden", fusion_hidden)->capture_default_str();
    train->add_option("--log", train_log, "per-episode JSONL training log");
    train->add_option("--episodes", topts.episodes)->capture_default_str();
    train->add_option("--lr", topts.lr)->capture_default_str();
    train->add_option("--hidden", topts.policy_hidden)->capture_default_str();
    train->add_option("--train-frac", train_frac, "fraction of cases used")->capture_default_str();
    train->add_option("--t-start", topts.t_start)->capture_default_str();
    train->add_option("--t-end", topts.t_end)->capture_default_str();
    train->add_option("--schedule-fraction", topts.schedule_fraction)->capture_default_str();
    train->add_option("--k", topts.nav.k_candidates)->capture_default_str();
    train->add_option("--depth", topts.nav.expansion_depth)->capture_default_str();
    train->add_flag("--no-r-acc", no_r_acc, "ablation: drop the accuracy reward");
    train->add_flag("--no-r-div", no_r_div, "ablation: drop the diversity reward");
    train->add_flag("--no-budget", no_budget, "ablation: drop the depth/hop penalties");
    train->add_flag("--no-linger", no_linger, "ablation: reuse z_fused on later hops");
    train->add_flag("--no-stop", no_stop, "ablation: remove the STOP action");

    // --- navigate --------------------------------------------------------
    auto* nav = app.add_subcommand("navigate", "roll out one case and emit its trace");
    std::string nav_store, nav_cases, nav_policy, nav_fusion, nav_case_id, nav_out;
    NavigationConfig ncfg;
    bool nav_no_linger = false, nav_no_stop = false, nav_ttt = false;
    nav->add_option("--store", nav_store)->required();
    nav->add_option("--cases", nav_cases)->required();
    nav->add_option("--policy", nav_policy)->required();
    nav->add_option("--fusion", nav_fusion, "fusion checkpoint (default: identity init)");
    nav->add_option("--fusion-hidden", fusion_hidden)->capture_default_str();
    nav->add_option("--case", nav_case_id, "case_id to run (default: first case)");
    nav->add_option("--out", nav_out, "trace JSON path (default: stdout)");
    nav->add_option("--k", ncfg.k_candidates)->capture_default_str();
    nav->add_option("--depth", ncfg.expansion_depth)->capture_default_str();
    nav->add_flag("--greedy", ncfg.greedy, "argmax instead of sampling");
    nav->add_flag("--no-linger", nav_no_linger);
    nav->add_flag("--no-stop", nav_no_stop);
    nav->add_flag("--ttt", nav_ttt, "single-step test-time adapter update after hop 1");

    // --- evaluate --------------------------------------------------------
    auto* eval = app.add_subcommand("evaluate", "compare walker against baselines");
    std::string eval_store, eval_cases, eval_policy, eval_fusion, eval_json;
    EvaluationOptions eopts;
    bool eval_no_linger = false, eval_ttt = false;
    eval->add_option("--store", eval_store)->required();
    eval->add_option("--cases", eval_cases)->required();
    eval->add_option("--policy", eval_policy)->required();
    eval->add_option("--fusion", eval_fusion, "fusion checkpoint (default: identity init)");
    eval->add_option("--fusion-hidden", fusion_hidden)->capture_default_str();
    eval->add_option("--json", eval_json, "also write results as JSON");
    eval->add_option("--budget", eopts.baseline_selections, "selections for baselines")->capture_default_str();
    eval->add_option("--k", eopts.nav.k_candidates)->capture_default_str();
    eval->add_option("--depth", eopts.nav.expansion_depth)->capture_default_str();
    eval->add_flag("--greedy", eopts.nav.greedy, "walker picks argmax instead of sampling");
    eval->add_flag("--no-linger", eval_no_linger);
    eval->add_flag("--ttt", eval_ttt);

    // --- query -----------------------------------------------------------
    auto* query = app.add_subcommand("query", "raw index search");
    std::string q_store, q_node;
    std::vector<double> q_vec;
    size_t q_k = 10, q_ef = 0;
    query->add_option("--store", q_store)->required();
    query->add_option("--vector", q_vec, "query embedding components")->delimiter(',');
    query->add_option("--node", q_node, "use a stored node's embedding as the query");
    query->add_option("-k,--k", q_k)->capture_default_str();
    query->add_option("--ef", q_ef, "0 = index default")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    CLI::App* cmd = app.get_subcommands().front();
    spec.seed = seed;
    hnsw.seed = seed;
    topts.seed = seed;
    eopts.seed = seed;
    log_effective(*cmd, seed);

    if (cmd == gen) {
        SyntheticDataset data = generate_manifold(spec);
        fs::create_directories(gen_out);
        export_jsonl((fs::path(gen_out) / "nodes.jsonl").string(), data.records);
        save_cases((fs::path(gen_out) / "cases.jsonl").string(), data);
        std::cout << "wrote " << data.records.size() << " nodes, " << data.cases.size()
                  << " cases to " << gen_out << "\n";
        return 0;
    }

    if (cmd == build) {
        IngestResult in = ingest_jsonl(build_nodes, build_dims);
        if (!in.errors.empty()) {
            for (const auto& e : in.errors)
                std::cerr << build_nodes << ":" << e.line << ": " << e.message << "\n";
            std::cerr << in.errors.size() << " invalid line(s); store not built\n";
            return 2;
        }
        in.records = apply_fraction(std::move(in.records), graph_frac, "graph-frac");
        HypergraphStore store(tau_sim, hnsw);
        store.load_nodes(to_clinical_nodes(in.records), tau_prune);
        store.induce_all_edges();
        store.audit_incidence();
        save_store(store, build_out);
        if (!dump_edges.empty()) {
            std::ofstream f(dump_edges, std::ios::trunc);
            if (!f) throw DomainError("cannot write " + dump_edges);
            for (const auto& [id, e] : store.edges()) f << edge_to_json(e) << '\n';
        }
        std::cout << "store: " << store.nodes().size() << " nodes (pruned from "
                  << in.records.size() << "), " << store.edges().size() << " hyperedges -> "
                  << build_out << "\n";
        return 0;
    }

    if (cmd == train) {
        HypergraphStore store = load_store(train_store);
        CaseSet cs = load_cases(train_cases);
        cs.cases = apply_fraction(std::move(cs.cases), train_frac, "train-frac");
        if (cs.cases.empty()) throw DomainError("no cases in " + train_cases);
        FusionParameters fusion =
            load_or_init_fusion(train_fusion, store_dims(store), fusion_hidden, seed);
        if (no_r_acc) topts.nav.reward_weights.lambda_a = 0.0;
        if (no_r_div) topts.nav.reward_weights.lambda_d = 0.0;
        if (no_budget) topts.nav.reward_weights.lambda_p = 0.0;
        topts.nav.linger_enabled = !no_linger;
        topts.nav.stop_enabled = !no_stop;
        TrainResult result = train_policy(store, cs.cases, fusion, topts);
        write_file(train_out, save_policy(result.policy));
        if (!train_log.empty()) {
            std::ofstream f(train_log, std::ios::trunc);
            if (!f) throw DomainError("cannot write " + train_log);
            for (const auto& e : result.log) {
                json j;
                j["episode"] = e.episode;
                j["reward"] = e.reward;
                j["r_acc"] = e.r_acc;
                j["r_div"] = e.r_div;
                j["r_dp"] = e.r_dp;
                j["r_hp"] = e.r_hp;
                j["baseline"] = e.baseline;
                f << j.dump() << '\n';
            }
        }
        double tail = 0;
        size_t n_tail = std::min<size_t>(100, result.log.size());
        for (size_t i = result.log.size() - n_tail; i < result.log.size(); ++i)
            tail += result.log[i].reward;
        std::cout << "trained " << result.log.size() << " episodes; mean reward over last "
                  << n_tail << ": " << (n_tail ? tail / n_tail : 0.0) << "; policy -> "
                  << train_out << "\n";
        return 0;
    }

    if (cmd == nav) {
        HypergraphStore store = load_store(nav_store);
        CaseSet cs = load_cases(nav_cases);
        if (cs.cases.empty()) throw DomainError("no cases in " + nav_cases);
        const DiagnosticCase* chosen = &cs.cases.front();
        if (!nav_case_id.empty()) {
            chosen = nullptr;
            for (const auto& c : cs.cases)
                if (c.case_id == nav_case_id) chosen = &c;
            if (!chosen) throw NotFoundError("case not found: " + nav_case_id);
        }
        PolicyParameters policy = load_policy(read_file(nav_policy));
        FusionParameters fusion =
            load_or_init_fusion(nav_fusion, store_dims(store), fusion_hidden, seed);
        ncfg.linger_enabled = !nav_no_linger;
        ncfg.stop_enabled = !nav_no_stop;
        ncfg.ttt.enabled = nav_ttt;
        EpisodeTrace trace = run_episode(*chosen, store, policy, fusion, ncfg, seed);
        std::string out = trace_to_json(trace);
        if (nav_out.empty()) {
            std::cout << out << "\n";
        } else {
            std::ofstream f(nav_out, std::ios::trunc);
            if (!f) throw DomainError("cannot write " + nav_out);
            f << out << "\n";
            std::cout << "trace -> " << nav_out << "\n";
        }
        return 0;
    }

    if (cmd == eval) {
        HypergraphStore store = load_store(eval_store);
        CaseSet cs = load_cases(eval_cases);
        PolicyParameters policy = load_policy(read_file(eval_policy));
        FusionParameters fusion =
            load_or_init_fusion(eval_fusion, store_dims(store), fusion_hidden, seed);
        eopts.nav.linger_enabled = !eval_no_linger;
        eopts.nav.ttt.enabled = eval_ttt;
        std::vector<MethodResult> results =
            evaluate(store, policy, fusion, cs.cases, cs.ground_truth, eopts);
        std::cout << format_table(results);
        if (!eval_json.empty()) {
            std::ofstream f(eval_json, std::ios::trunc);
            if (!f) throw DomainError("cannot write " + eval_json);
            f << results_to_json(results) << "\n";
        }
        return 0;
    }

    if (cmd == query) {
        HypergraphStore store = load_store(q_store);
        Vec q;
        if (!q_node.empty()) {
            q = store.node(q_node).embedding;
        } else if (!q_vec.empty()) {
            q.assign(q_vec.begin(), q_vec.end());
        } else {
            std::cerr << "query: need --vector or --node\n";
            return 1;
        }
        for (const auto& hit : store.index().search(l2_normalize(q), q_k, q_ef)) {
            const ClinicalNode& n = store.node(hit.id);
            std::printf("%-12s %-9s %-10s %.6f\n", hit.id.c_str(),
                        to_string(n.modality).c_str(), n.study_id.c_str(), hit.distance);
        }
        return 0;
    }

    return 1;  // unreachable with require_subcommand(1)
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CorruptionError& e) {
        std::cerr << "corruption: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "format: " << e.what() << "\n";
        return 3;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
