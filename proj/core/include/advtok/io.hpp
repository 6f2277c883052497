#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "advtok/types.hpp"
#include "advtok/victim.hpp"

namespace advtok {

/// One attackable example: a labeled sequence joined with its sanitized
/// per-position candidate inventory.
struct Instance {
  std::int64_t id = 0;
  TokenSequence seq;
  CandidateSet cands;
};

using Dataset = std::vector<Instance>;

/// Line-delimited JSON records {id, tokens, label} after a header line
/// {"format": "advtok-dataset", "version": 1}.
struct DatasetRecord {
  std::int64_t id = 0;
  std::vector<TokenId> tokens;
  std::optional<int> label;
};

std::vector<DatasetRecord> load_dataset_records(const std::string& path);
void save_dataset_records(const std::string& path,
                          const std::vector<DatasetRecord>& records);

/// Candidate files mirror the dataset: {id, candidates: [[int], ...]} aligned
/// by id, one inner list per token position.
struct CandidateRecord {
  std::int64_t id = 0;
  std::vector<std::vector<TokenId>> candidates;
};

std::vector<CandidateRecord> load_candidate_records(const std::string& path);
void save_candidate_records(const std::string& path,
                            const std::vector<CandidateRecord>& records);

/// Joins dataset and candidate records by id, validating alignment and
/// sanitizing candidate lists against the vocabulary.
Dataset join_dataset(const std::vector<DatasetRecord>& records,
                     const std::vector<CandidateRecord>& candidates,
                     const Vocabulary& vocab);

void save_vocabulary(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::string& path);

/// Token -> cost map for the table fluency scorer.
void save_fluency_table(const std::string& path,
                        const std::unordered_map<TokenId, double>& costs);
TableFluencyScorer load_fluency_table(const std::string& path);

}  // namespace advtok
