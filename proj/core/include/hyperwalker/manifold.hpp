#pragma once

#include <string>
#include <vector>

#include "hyperwalker/common.hpp"

namespace hyperwalker {

enum class Modality { Ehr, Image, Report, Knowledge };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

struct ClinicalNode {
    std::string node_id;
    std::string study_id;
    std::string subject_id;
    Modality modality = Modality::Ehr;
    Vec embedding;
    std::vector<std::string> merged_from;  // nonempty only for prune representatives
};

double dot(const Vec& a, const Vec& b);
double norm(const Vec& v);

// S(a, b) = a.b / (|a||b|). Throws DegenerateVectorError naming the zero operand.
double cosine_similarity(const Vec& a, const Vec& b);

// d(a, b) = 1 - S(a, b), in [0, 2].
double cosine_distance(const Vec& a, const Vec& b);

// Unit-length copy of v. Throws DegenerateVectorError if |v| < 1e-6.
Vec l2_normalize(const Vec& v);

bool is_unit(const Vec& v, double tol = 1e-6);

// Merge same-study nodes whose pairwise similarity exceeds tau_prune.
// Components are merged transitively and the pass repeats until no output
// pair exceeds the threshold. The representative keeps the smallest node_id
// and a similarity-weighted centroid embedding, renormalized to unit length.
std::vector<ClinicalNode> prune_study_nodes(const std::vector<ClinicalNode>& nodes,
                                            double tau_prune = 0.9);

}  // namespace hyperwalker
