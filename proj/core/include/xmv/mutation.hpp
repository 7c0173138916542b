#pragma once

// Synthetic Error Space: six deterministic mutation operators over valid
// explanations, and a rule-based checker that compares an explanation with
// the ground truth of its artifact.
//
// The checker works sentence by sentence. A sentence that names exactly one
// ranked item of the artifact is a claim about that item; its rank phrases
// ("ranks third", "rank 4", "#2", "most influential") and direction words
// (from the shipped antonym table) are compared with the canonical ranking
// and sign. Across the whole text it also looks for required top items that
// are never named, names from the hallucination lexicon that the artifact
// does not contain, and a missing conclusion.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "xmv/artifacts.hpp"
#include "xmv/verdict.hpp"

namespace xmv {

struct MutatedExplanation {
    std::string original;
    std::string mutated;
    ErrorCategory op = ErrorCategory::SwapTopFeature;
    std::uint64_t seed = 0;
    std::string mutation_note;
};

struct Violation {
    ErrorCategory category = ErrorCategory::SwapTopFeature;
    std::string evidence;
};

struct CheckOptions {
    std::size_t required_top = 3;   // M: top items that must be mentioned
    std::size_t min_sentences = 3;  // truncation floor
    TextualizeOptions textualize;
};

/// Sentence openers that count as a conclusion.
const std::vector<std::string>& closing_markers();
bool is_closing_sentence(std::string_view sentence);

struct AntonymPair {
    std::string positive;
    std::string negative;
};
const std::vector<AntonymPair>& antonym_table();
const std::vector<std::string>& hallucination_lexicon();

/// Rank claims made by one sentence (1-based), in order of appearance.
std::vector<int> rank_claims(std::string_view sentence);

std::vector<Violation> check_against_truth(std::string_view explanation, const XaiArtifact& artifact,
                                           const CheckOptions& opts = {});

bool has_violation(const std::vector<Violation>& v, ErrorCategory c);

/// Throws InapplicableOperator when the explanation lacks what the operator
/// needs (fewer than two mentioned items for swaps, no direction phrase in a
/// claim sentence, nothing left after omission, a truncation that would keep
/// the conclusion, ...).
MutatedExplanation mutate(std::string_view explanation, const XaiArtifact& artifact, ErrorCategory op,
                          std::uint64_t seed, const CheckOptions& opts = {});

/// A valid narrative for `artifact` built from fixed sentence frames: an
/// opener, one rank-claim sentence per mentioned item (at least the top three)
/// and a closing sentence. The style seed varies the frames and how many items
/// are mentioned. check_against_truth reports nothing on the result.
std::string reference_explanation(const XaiArtifact& artifact, std::uint64_t style_seed);

struct ValidExplanation {
    std::string explanation;
    const XaiArtifact* artifact = nullptr;
};

struct SyntheticItem {
    std::string id;
    std::string artifact_ref;
    std::size_t source_index = 0;
    MutatedExplanation mutant;
};

struct SkippedMutation {
    std::size_t source_index = 0;
    ErrorCategory op = ErrorCategory::SwapTopFeature;
    std::string reason;
};

struct SyntheticCorpus {
    std::vector<SyntheticItem> items;
    std::vector<SkippedMutation> skipped;
    std::uint64_t seed = 0;
};

/// Applies every operator to every valid item (per-item seeds are derived
/// from `seed`), then trims each operator to the smallest non-zero count so
/// the corpus is balanced. Inapplicable and trimmed mutations are reported.
SyntheticCorpus build_synthetic_corpus(const std::vector<ValidExplanation>& valid,
                                       const std::vector<ErrorCategory>& ops, std::uint64_t seed,
                                       const CheckOptions& opts = {});

nlohmann::json to_json(const SyntheticItem& item);
SyntheticItem synthetic_item_from_json(const nlohmann::json& j);

/// splitmix64 step; the only RNG used by the operators.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace xmv
