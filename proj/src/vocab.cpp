#include "stackptr/vocab.hpp"

#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "stackptr/error.hpp"

namespace stackptr {

SymbolTable::SymbolTable(std::vector<std::string> reserved) {
  for (auto& r : reserved) add(r);
  reserved_ = names_.size();
}

int SymbolTable::add(const std::string& s) {
  auto it = ids_.find(s);
  if (it != ids_.end()) return it->second;
  if (frozen_) return id(s);
  const int id = static_cast<int>(names_.size());
  names_.push_back(s);
  ids_.emplace(s, id);
  return id;
}

int SymbolTable::id(const std::string& s) const {
  auto it = ids_.find(s);
  if (it != ids_.end()) return it->second;
  return reserved_ > static_cast<std::size_t>(kUnkId) ? kUnkId : -1;
}

namespace {

const std::string& pos_of(const Sentence& s, std::size_t i, PosColumn column) {
  return column == PosColumn::upos ? s.upos[i] : s.xpos[i];
}

}  // namespace

Vocabulary Vocabulary::fit(const std::vector<TreebankEntry>& data, PosColumn column) {
  Vocabulary v;
  v.words = SymbolTable({"<pad>", "<unk>", "<root>"});
  v.chars = SymbolTable({"<pad>", "<unk>"});
  v.pos = SymbolTable({"<pad>", "<unk>", "<root>"});
  v.labels = SymbolTable();
  v.pos_column = column;
  for (const auto& e : data) {
    for (std::size_t i = 1; i < e.sentence.words.size(); ++i) {
      v.words.add(lowercase(e.sentence.words[i]));
      for (const auto& c : utf8_chars(e.sentence.words[i])) v.chars.add(c);
      v.pos.add(pos_of(e.sentence, i, column));
      v.labels.add(e.tree.labels[i]);
    }
  }
  v.words.freeze();
  v.chars.freeze();
  v.pos.freeze();
  v.labels.freeze();
  return v;
}

EncodedSentence encode(const Vocabulary& vocab, const Sentence& s) {
  EncodedSentence out;
  const std::size_t n = s.size();
  out.words.reserve(n + 1);
  out.chars.reserve(n + 1);
  out.pos.reserve(n + 1);
  out.words.push_back(kRootId);
  out.chars.emplace_back();
  out.pos.push_back(kRootId);
  for (std::size_t i = 1; i <= n; ++i) {
    out.words.push_back(vocab.words.id(lowercase(s.words[i])));
    std::vector<int> cs;
    for (const auto& c : utf8_chars(s.words[i])) cs.push_back(vocab.chars.id(c));
    if (cs.empty()) cs.push_back(kUnkId);
    out.chars.push_back(std::move(cs));
    out.pos.push_back(vocab.pos.id(pos_of(s, i, vocab.pos_column)));
  }
  return out;
}

EmbeddingTable load_embeddings(const std::string& path, const SymbolTable& words, std::size_t dim,
                               std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file " + path);

  EmbeddingTable table;
  table.dim = dim;
  table.rows.assign(words.size() * dim, 0.0);
  std::vector<bool> found(words.size(), false);

  std::string line;
  std::size_t line_no = 0;
  std::size_t file_dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    std::vector<double> vec;
    std::string tok;
    while (ls >> tok) {
      double x = 0.0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec != std::errc() || p != tok.data() + tok.size()) {
        throw DataError(path + ": line " + std::to_string(line_no) + ": non-numeric value '" + tok + "'");
      }
      vec.push_back(x);
    }
    // word2vec-style "count dim" header.
    if (line_no == 1 && vec.size() == 1 && word.find_first_not_of("0123456789") == std::string::npos) continue;
    if (file_dim == 0) {
      file_dim = vec.size();
      if (file_dim != dim) {
        throw DataError(path + ": line " + std::to_string(line_no) + ": vector dimension " +
                        std::to_string(file_dim) + " does not match the configured " + std::to_string(dim));
      }
    } else if (vec.size() != file_dim) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": vector dimension " + std::to_string(vec.size()) +
                      " differs from earlier lines (" + std::to_string(file_dim) + ")");
    }
    const std::string key = lowercase(word);
    if (!words.contains(key)) continue;
    const auto id = static_cast<std::size_t>(words.id(key));
    if (id < words.reserved() || found[id]) continue;
    found[id] = true;
    std::copy(vec.begin(), vec.end(), table.rows.begin() + static_cast<std::ptrdiff_t>(id * dim));
    ++table.hits;
  }

  std::mt19937_64 rng(seed);
  for (std::size_t id = 1; id < words.size(); ++id) {
    if (found[id]) continue;
    for (std::size_t k = 0; k < dim; ++k) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      table.rows[id * dim + k] = -0.1 + 0.2 * u;
    }
  }
  const std::size_t real = words.size() - words.reserved();
  table.coverage = real == 0 ? 0.0 : static_cast<double>(table.hits) / static_cast<double>(real);
  return table;
}

}  // namespace stackptr
