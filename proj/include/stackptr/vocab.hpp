#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "stackptr/treebank.hpp"

namespace stackptr {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kRootId = 2;  // word and POS tables only

/// Dense string <-> id map. Reserved entries come first.
class SymbolTable {
 public:
  SymbolTable() = default;
  explicit SymbolTable(std::vector<std::string> reserved);

  int add(const std::string& s);
  /// Id of `s`, or kUnkId when absent (or -1 if the table has no unknown slot).
  int id(const std::string& s) const;
  bool contains(const std::string& s) const { return ids_.count(s) != 0; }
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return names_.size(); }
  std::size_t reserved() const { return reserved_; }
  const std::vector<std::string>& names() const { return names_; }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  bool operator==(const SymbolTable& o) const { return names_ == o.names_ && reserved_ == o.reserved_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
  std::size_t reserved_ = 0;
  bool frozen_ = false;
};

enum class PosColumn { upos, xpos };

struct Vocabulary {
  SymbolTable words;   // <pad> <unk> <root>, lowercased forms
  SymbolTable chars;   // <pad> <unk>, original case
  SymbolTable pos;     // <pad> <unk> <root>
  SymbolTable labels;  // no reserved entries
  PosColumn pos_column = PosColumn::upos;

  /// Builds and freezes all tables from training data (no frequency cutoff).
  static Vocabulary fit(const std::vector<TreebankEntry>& data, PosColumn column = PosColumn::upos);

  bool operator==(const Vocabulary&) const = default;
};

/// Id form of a sentence; index 0 is the virtual root.
struct EncodedSentence {
  std::vector<int> words;
  std::vector<std::vector<int>> chars;  // chars[0] is empty (root)
  std::vector<int> pos;

  std::size_t size() const { return words.size() - 1; }
};

EncodedSentence encode(const Vocabulary& vocab, const Sentence& s);

struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<double> rows;  // words.size() x dim, row-major
  std::size_t hits = 0;      // non-reserved words found in the file
  double coverage = 0.0;     // hits / non-reserved words
};

/// Reads "word v_1 ... v_d" lines (an optional "count dim" header line is
/// skipped). Vocabulary words found in the file (lowercased match) copy the
/// file vector; every other row except padding is drawn from U(-0.1, 0.1).
EmbeddingTable load_embeddings(const std::string& path, const SymbolTable& words, std::size_t dim,
                               std::uint64_t seed);

}  // namespace stackptr
