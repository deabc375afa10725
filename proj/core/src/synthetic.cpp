#include "hyperwalker/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace hyperwalker {

using nlohmann::json;

namespace {

Vec random_unit(size_t dims, Rng& rng) {
    Vec v(dims);
    for (auto& x : v) x = static_cast<float>(gaussian(rng));
    return l2_normalize(v);
}

Vec perturb(const Vec& base, const Vec& direction, double scale, double noise, Rng& rng) {
    Vec v(base.size());
    for (size_t i = 0; i < base.size(); ++i) {
        double x = base[i] + scale * direction[i];
        if (noise > 0) x += noise * gaussian(rng);
        v[i] = static_cast<float>(x);
    }
    return l2_normalize(v);
}

}  // namespace

SyntheticDataset generate_manifold(const SyntheticSpec& spec) {
    if (spec.dims < 4) throw ContractViolation("generate_manifold: dims must be >= 4");
    Rng rng(spec.seed);

    std::vector<Vec> concepts(spec.n_conditions);
    for (auto& c : concepts) c = random_unit(spec.dims, rng);

    // Fixed perturbation direction per modality.
    std::map<std::string, Vec> modality_dirs;
    for (const char* m : {"ehr", "image", "report"}) modality_dirs[m] = random_unit(spec.dims, rng);

    SyntheticDataset ds;
    size_t next_node = 0;
    auto node_id = [&] {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "n%06zu", next_node++);
        return std::string(buf);
    };

    const size_t n_kb = spec.n_knowledge > 0 ? spec.n_knowledge : spec.n_conditions;
    std::vector<std::string> kb_ids(spec.n_conditions);
    for (size_t k = 0; k < n_kb; ++k) {
        const size_t cond = k % spec.n_conditions;
        NodeRecord r;
        r.node_id = node_id();
        r.subject_id = "kb";
        r.study_id = "kb_" + std::to_string(k);
        r.modality = "knowledge";
        r.embedding = concepts[cond];
        r.metadata["condition"] = std::to_string(cond);
        if (kb_ids[cond].empty()) kb_ids[cond] = r.node_id;
        ds.records.push_back(std::move(r));
    }

    struct StudyPlan {
        std::string subject_id, study_id;
        size_t condition;
        bool held_out;
    };
    std::vector<StudyPlan> plans;
    for (size_t s = 0; s < spec.n_subjects; ++s) {
        for (size_t t = 0; t < spec.studies_per_subject; ++t) {
            StudyPlan p;
            p.subject_id = "subj" + std::to_string(s);
            p.study_id = "study" + std::to_string(s) + "_" + std::to_string(t);
            p.condition = static_cast<size_t>(uniform01(rng) * spec.n_conditions) %
                          spec.n_conditions;
            p.held_out = uniform01(rng) < spec.case_fraction;
            plans.push_back(std::move(p));
        }
    }

    std::map<size_t, std::vector<std::string>> condition_evidence;  // reports + knowledge
    for (size_t c = 0; c < spec.n_conditions; ++c)
        if (!kb_ids[c].empty()) condition_evidence[c].push_back(kb_ids[c]);

    for (const auto& plan : plans) {
        const Vec& concept_dir = concepts[plan.condition];
        Vec img = perturb(concept_dir, modality_dirs["image"], spec.modality_offsets.image,
                          spec.cluster_spread, rng);
        Vec rep = perturb(concept_dir, modality_dirs["report"], spec.modality_offsets.report,
                          spec.cluster_spread, rng);
        const size_t n_ehr = 1 + static_cast<size_t>(uniform01(rng) * 3.0) % 3;
        std::vector<Vec> ehrs;
        for (size_t e = 0; e < n_ehr; ++e)
            ehrs.push_back(perturb(concept_dir, modality_dirs["ehr"], spec.modality_offsets.ehr,
                                   spec.cluster_spread, rng));

        if (plan.held_out) {
            DiagnosticCase c;
            c.case_id = "case_" + plan.study_id;
            c.subject_id = plan.subject_id;
            c.study_id = plan.study_id;
            c.z_img = img;
            c.z_ehr = ehrs.front();
            ds.case_condition[c.case_id] = std::to_string(plan.condition);
            ds.cases.push_back(std::move(c));
            continue;
        }

        auto emit = [&](const char* modality, Vec emb) {
            NodeRecord r;
            r.node_id = node_id();
            r.subject_id = plan.subject_id;
            r.study_id = plan.study_id;
            r.modality = modality;
            r.embedding = std::move(emb);
            r.metadata["condition"] = std::to_string(plan.condition);
            std::string id = r.node_id;
            ds.records.push_back(std::move(r));
            return id;
        };
        emit("image", img);
        condition_evidence[plan.condition].push_back(emit("report", rep));
        for (const auto& e : ehrs) {
            emit("ehr", e);
            if (uniform01(rng) < spec.duplicate_rate) {
                // Near-duplicate well inside the tau_prune=0.9 ball.
                Vec dup(e.size());
                for (size_t i = 0; i < e.size(); ++i)
                    dup[i] = static_cast<float>(e[i] + 0.01 * gaussian(rng));
                emit("ehr", l2_normalize(dup));
            }
        }
    }

    for (const auto& c : ds.cases) {
        const size_t cond = std::stoul(ds.case_condition.at(c.case_id));
        ds.ground_truth[c.case_id] = condition_evidence[cond];
    }
    return ds;
}

std::string record_to_json(const NodeRecord& r) {
    json j;
    j["node_id"] = r.node_id;
    j["subject_id"] = r.subject_id;
    j["study_id"] = r.study_id;
    j["modality"] = r.modality;
    j["embedding"] = r.embedding;
    if (!r.metadata.empty()) j["metadata"] = r.metadata;
    return j.dump();
}

void export_jsonl(const std::string& path, const std::vector<NodeRecord>& records) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DomainError("cannot open for write: " + path);
    for (const auto& r : records) f << record_to_json(r) << '\n';
}

IngestResult ingest_jsonl(const std::string& path, size_t expected_dims) {
    std::ifstream f(path);
    if (!f) throw DomainError("cannot open for read: " + path);

    IngestResult out;
    std::set<std::string> seen_ids;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            NodeRecord r;
            r.node_id = j.at("node_id").get<std::string>();
            r.subject_id = j.at("subject_id").get<std::string>();
            r.study_id = j.at("study_id").get<std::string>();
            r.modality = j.at("modality").get<std::string>();
            modality_from_string(r.modality);  // validates
            // Values parse as double and land in float32 regardless of the
            // precision they were serialized at.
            r.embedding = j.at("embedding").get<Vec>();
            if (j.contains("metadata"))
                r.metadata = j.at("metadata").get<std::map<std::string, std::string>>();

            if (expected_dims == 0 && out.records.empty() && out.errors.empty())
                expected_dims = r.embedding.size();
            if (expected_dims != 0 && r.embedding.size() != expected_dims) {
                out.errors.push_back({lineno, "embedding has " +
                                                  std::to_string(r.embedding.size()) +
                                                  " dims, expected " +
                                                  std::to_string(expected_dims)});
                continue;
            }
            if (!seen_ids.insert(r.node_id).second) {
                out.errors.push_back({lineno, "duplicate node_id: " + r.node_id});
                continue;
            }
            out.records.push_back(std::move(r));
        } catch (const std::exception& e) {
            out.errors.push_back({lineno, e.what()});
        }
    }
    return out;
}

std::vector<ClinicalNode> to_clinical_nodes(const std::vector<NodeRecord>& records) {
    std::vector<ClinicalNode> nodes;
    nodes.reserve(records.size());
    for (const auto& r : records) {
        ClinicalNode n;
        n.node_id = r.node_id;
        n.subject_id = r.subject_id;
        n.study_id = r.study_id;
        n.modality = modality_from_string(r.modality);
        n.embedding = r.embedding;
        nodes.push_back(std::move(n));
    }
    return nodes;
}

}  // namespace hyperwalker
