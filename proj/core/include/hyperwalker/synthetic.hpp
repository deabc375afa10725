#pragma once

#include <map>
#include <string>
#include <vector>

#include "hyperwalker/manifold.hpp"
#include "hyperwalker/navigator.hpp"

namespace hyperwalker {

struct SyntheticSpec {
    size_t dims = 32;
    size_t n_subjects = 50;
    size_t studies_per_subject = 4;
    size_t n_conditions = 8;
    double cluster_spread = 0.25;        // within-condition angular noise
    struct ModalityOffsets {
        double image = 0.3;   // direction perturbation scale per modality
        double report = 0.3;
        double ehr = 0.3;
    } modality_offsets;
    size_t n_knowledge = 0;              // 0 means one per condition
    double duplicate_rate = 0.0;         // fraction of near-duplicate EHR nodes
    double case_fraction = 0.2;          // studies held out as diagnostic cases
    uint64_t seed = 0;
};

struct NodeRecord {
    std::string node_id;
    std::string subject_id;
    std::string study_id;
    std::string modality;
    Vec embedding;
    std::map<std::string, std::string> metadata;
};

struct SyntheticDataset {
    std::vector<NodeRecord> records;  // hypergraph nodes
    std::vector<DiagnosticCase> cases;
    std::map<std::string, std::vector<std::string>> ground_truth;  // case_id -> evidence ids
    std::map<std::string, std::string> case_condition;
};

// Planted-evidence manifold: one unit concept direction per condition, noisy
// modality-offset rotations per study, one knowledge node per condition.
// Ground truth for a case is the same-condition report and knowledge nodes.
SyntheticDataset generate_manifold(const SyntheticSpec& spec);

struct IngestError {
    size_t line = 0;
    std::string message;
};

struct IngestResult {
    std::vector<NodeRecord> records;
    std::vector<IngestError> errors;
};

// One JSON object per line. expected_dims = 0 accepts the first record's dims.
// Reduced-precision (e.g. float16-quantized) values upcast to 32-bit on read.
IngestResult ingest_jsonl(const std::string& path, size_t expected_dims = 0);

void export_jsonl(const std::string& path, const std::vector<NodeRecord>& records);

std::vector<ClinicalNode> to_clinical_nodes(const std::vector<NodeRecord>& records);

std::string record_to_json(const NodeRecord& r);

}  // namespace hyperwalker
