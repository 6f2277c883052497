#include "advtok/io.hpp"

#include <fstream>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "advtok/errors.hpp"

namespace advtok {

namespace {

using json = nlohmann::ordered_json;

constexpr int kFileVersion = 1;

json parse_line(const std::string& path, int line_no, const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(path, line_no, std::string("invalid JSON: ") + e.what());
  }
}

void check_header(const std::string& path, const json& header, const char* format) {
  if (!header.is_object() || header.value("format", "") != format) {
    throw DataError(path, 1, std::string("expected header {\"format\": \"") + format +
                                 "\", ...} on the first line");
  }
  if (header.value("version", 0) != kFileVersion) {
    throw DataError(path, 1, "unsupported file version");
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open file for writing: " + path);
  return out;
}

json header_line(const char* format) {
  json h;
  h["format"] = format;
  h["version"] = kFileVersion;
  return h;
}

template <typename Fn>
void for_each_record(const std::string& path, const char* format, Fn&& fn) {
  auto in = open_input(path);
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json doc = parse_line(path, line_no, line);
    if (!saw_header) {
      check_header(path, doc, format);
      saw_header = true;
      continue;
    }
    fn(line_no, doc);
  }
  if (!saw_header) throw DataError(path, 1, "empty file (missing header line)");
}

}  // namespace

std::vector<DatasetRecord> load_dataset_records(const std::string& path) {
  std::vector<DatasetRecord> records;
  std::unordered_set<std::int64_t> seen;
  for_each_record(path, "advtok-dataset", [&](int line_no, const json& doc) {
    DatasetRecord rec;
    try {
      rec.id = doc.at("id").get<std::int64_t>();
      rec.tokens = doc.at("tokens").get<std::vector<TokenId>>();
      if (doc.contains("label") && !doc.at("label").is_null()) {
        rec.label = doc.at("label").get<int>();
      }
    } catch (const json::exception& e) {
      throw DataError(path, line_no, std::string("bad dataset record: ") + e.what());
    }
    if (rec.tokens.empty()) {
      throw DataError(path, line_no, "record has an empty token list");
    }
    if (!seen.insert(rec.id).second) {
      throw DataError(path, line_no, "duplicate id " + std::to_string(rec.id));
    }
    records.push_back(std::move(rec));
  });
  return records;
}

void save_dataset_records(const std::string& path,
                          const std::vector<DatasetRecord>& records) {
  auto out = open_output(path);
  out << header_line("advtok-dataset").dump() << "\n";
  for (const auto& rec : records) {
    json doc;
    doc["id"] = rec.id;
    doc["tokens"] = rec.tokens;
    if (rec.label.has_value()) {
      doc["label"] = *rec.label;
    } else {
      doc["label"] = nullptr;
    }
    out << doc.dump() << "\n";
  }
}

std::vector<CandidateRecord> load_candidate_records(const std::string& path) {
  std::vector<CandidateRecord> records;
  std::unordered_set<std::int64_t> seen;
  for_each_record(path, "advtok-candidates", [&](int line_no, const json& doc) {
    CandidateRecord rec;
    try {
      rec.id = doc.at("id").get<std::int64_t>();
      rec.candidates = doc.at("candidates").get<std::vector<std::vector<TokenId>>>();
    } catch (const json::exception& e) {
      throw DataError(path, line_no, std::string("bad candidate record: ") + e.what());
    }
    if (!seen.insert(rec.id).second) {
      throw DataError(path, line_no, "duplicate id " + std::to_string(rec.id));
    }
    records.push_back(std::move(rec));
  });
  return records;
}

void save_candidate_records(const std::string& path,
                            const std::vector<CandidateRecord>& records) {
  auto out = open_output(path);
  out << header_line("advtok-candidates").dump() << "\n";
  for (const auto& rec : records) {
    json doc;
    doc["id"] = rec.id;
    doc["candidates"] = rec.candidates;
    out << doc.dump() << "\n";
  }
}

Dataset join_dataset(const std::vector<DatasetRecord>& records,
                     const std::vector<CandidateRecord>& candidates,
                     const Vocabulary& vocab) {
  std::unordered_map<std::int64_t, const CandidateRecord*> by_id;
  by_id.reserve(candidates.size());
  for (const auto& rec : candidates) by_id[rec.id] = &rec;

  Dataset out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    const auto it = by_id.find(rec.id);
    if (it == by_id.end()) {
      throw DataError("no candidate record for example id " + std::to_string(rec.id));
    }
    if (it->second->candidates.size() != rec.tokens.size()) {
      throw DataError("candidate list length mismatch for example id " +
                      std::to_string(rec.id));
    }
    for (TokenId t : rec.tokens) {
      if (!vocab.valid(t)) {
        throw DataError("token id " + std::to_string(t) +
                        " outside vocabulary in example " + std::to_string(rec.id));
      }
    }
    Instance inst;
    inst.id = rec.id;
    inst.seq = TokenSequence{rec.tokens, rec.label};
    inst.cands = CandidateSet::sanitized(inst.seq, it->second->candidates, vocab);
    out.push_back(std::move(inst));
  }
  return out;
}

void save_vocabulary(const std::string& path, const Vocabulary& vocab) {
  json doc;
  doc["format"] = "advtok-vocab";
  doc["version"] = kFileVersion;
  doc["size"] = vocab.size();
  doc["dim"] = vocab.dim();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(vocab.embeddings().size()));
  for (int i = 0; i < vocab.size(); ++i) {
    for (int j = 0; j < vocab.dim(); ++j) {
      flat.push_back(vocab.embeddings()(i, j));
    }
  }
  doc["embeddings"] = flat;
  auto out = open_output(path);
  out << doc.dump() << "\n";
}

Vocabulary load_vocabulary(const std::string& path) {
  auto in = open_input(path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError(path, 1, std::string("invalid vocabulary JSON: ") + e.what());
  }
  if (doc.value("format", "") != "advtok-vocab" || doc.value("version", 0) != kFileVersion) {
    throw DataError(path, 1, "not an advtok vocabulary file");
  }
  const int size = doc.at("size").get<int>();
  const int dim = doc.at("dim").get<int>();
  const auto flat = doc.at("embeddings").get<std::vector<double>>();
  if (static_cast<int>(flat.size()) != size * dim) {
    throw DataError(path, 1, "embedding payload does not match size * dim");
  }
  Matrix emb(size, dim);
  std::size_t at = 0;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < dim; ++j) emb(i, j) = flat[at++];
  }
  return Vocabulary(std::move(emb));
}

void save_fluency_table(const std::string& path,
                        const std::unordered_map<TokenId, double>& costs) {
  json doc;
  doc["format"] = "advtok-fluency";
  doc["version"] = kFileVersion;
  json table = json::object();
  std::map<TokenId, double> sorted(costs.begin(), costs.end());
  for (const auto& [token, cost] : sorted) {
    table[std::to_string(token)] = cost;
  }
  doc["costs"] = std::move(table);
  auto out = open_output(path);
  out << doc.dump() << "\n";
}

TableFluencyScorer load_fluency_table(const std::string& path) {
  auto in = open_input(path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw DataError(path, 1, std::string("invalid fluency JSON: ") + e.what());
  }
  if (doc.value("format", "") != "advtok-fluency" || doc.value("version", 0) != kFileVersion) {
    throw DataError(path, 1, "not an advtok fluency table");
  }
  std::unordered_map<TokenId, double> costs;
  for (const auto& [key, value] : doc.at("costs").items()) {
    costs[static_cast<TokenId>(std::stol(key))] = value.get<double>();
  }
  return TableFluencyScorer(std::move(costs));
}

}  // namespace advtok
