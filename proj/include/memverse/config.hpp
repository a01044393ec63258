#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "memverse/ltm_graph.hpp"
#include "memverse/retrieval.hpp"

namespace memverse {

/// Engine configuration. The file format is one `key = value` per line;
/// blank lines and lines starting with '#' are ignored. Recognized keys:
///
///   stm.capacity
///   orchestrator.consolidation_threshold
///   orchestrator.consolidation_period_s
///   orchestrator.consolidation_batch
///   orchestrator.prune_period_s
///   orchestrator.distill_period_s
///   retrieval.top_m, retrieval.hops, retrieval.context_budget,
///   retrieval.alpha, retrieval.beta, retrieval.min_score, retrieval.kinds
///   prune.max_entities, prune.max_relations, prune.lambda_per_day,
///   prune.min_salience, prune.protected_kinds
///   classify.core_lexicon          (path; one phrase per line)
///   extractor.backend              (rule | remote)
///   extractor.endpoint, extractor.model, extractor.prompt_template (path),
///   extractor.template_version, extractor.compression_budget,
///   extractor.max_in_flight
///   distill.min_pairs, distill.domain_tag, distill.export_dir
///   captioner.<modality>.endpoint, captioner.<modality>.model,
///   captioner.<modality>.frames    (modality: image | audio | video)
///   parametric.endpoint
///
/// Relative paths resolve against the config file's directory.
struct MemverseConfig {
  std::size_t stm_capacity = 10;

  std::size_t consolidation_threshold = 20;
  std::chrono::seconds consolidation_period{600};
  std::size_t consolidation_batch = 8;
  std::chrono::seconds prune_period{86400};
  std::chrono::seconds distill_period{86400};

  RetrievalParams retrieval;
  PruneBudget prune;

  std::vector<std::string> core_lexicon = default_core_lexicon();

  std::string extractor_backend = "rule";
  std::string extractor_endpoint;
  std::string extractor_model;
  std::string extractor_prompt_template;
  std::string extractor_template_version = "extract-v1";
  std::size_t compression_budget = 512;
  std::size_t extractor_max_in_flight = 4;

  std::size_t distill_min_pairs = 1;
  std::string distill_domain_tag = "general";
  std::filesystem::path export_dir = "exports";

  struct CaptionerEntry {
    std::string modality;
    std::string endpoint = "mock";
    std::string model = "mock-captioner";
    std::uint32_t frames = 1;
  };
  std::vector<CaptionerEntry> captioners;

  std::optional<std::string> parametric_endpoint;

  static std::vector<std::string> default_core_lexicon();
};

/// Throws kConfigInvalid on unknown keys or malformed values.
MemverseConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
MemverseConfig load_config(const std::filesystem::path& path);

}  // namespace memverse
