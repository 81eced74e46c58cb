#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stackptr {

/// Tokens of one sentence. Every vector has n+1 entries; index 0 is the
/// virtual root, whose strings are placeholders and never looked up.
struct Sentence {
  std::vector<std::string> words;
  std::vector<std::string> upos;  // CoNLL column 4 (CPOSTAG / UPOS)
  std::vector<std::string> xpos;  // CoNLL column 5 (POSTAG / XPOS)

  std::size_t size() const { return words.empty() ? 0 : words.size() - 1; }
};

inline constexpr const char* kRootWord = "$";

/// Head array over positions 0..n; heads[0] is -1 (the virtual root has no head).
struct DependencyTree {
  std::vector<int> heads;
  std::vector<std::string> labels;

  std::size_t size() const { return heads.empty() ? 0 : heads.size() - 1; }
  bool operator==(const DependencyTree&) const = default;
};

struct TreebankEntry {
  Sentence sentence;
  DependencyTree tree;
};

enum class ConllFormat { conllx, conllu };

ConllFormat parse_conll_format(std::string_view name);

/// `tokens` ignores the head and label columns (input to be parsed); the
/// resulting trees attach every word to the root with label "_".
enum class ReadMode { trees, tokens };

/// Parses CoNLL-X / CoNLL-U text. Comment lines ('#') are skipped in both
/// formats; in conllu mode multiword ranges ("3-4") and empty nodes ("3.1")
/// are skipped too. Every tree is validated; failures throw DataError naming
/// the line.
std::vector<TreebankEntry> read_conll(std::string_view text, ConllFormat format, ReadMode mode = ReadMode::trees);
std::vector<TreebankEntry> read_conll_file(const std::string& path, ConllFormat format,
                                           ReadMode mode = ReadMode::trees);

/// Writes one 10-column line per token with a blank line after each sentence.
/// Unmodelled columns are written as "_". Optional per-sentence comment lines
/// (without the leading "# ") are emitted before each block.
std::string write_conll(const std::vector<TreebankEntry>& entries, ConllFormat format,
                        const std::vector<std::string>& comments = {});

enum class PunctPolicy { ptb_ctb, ud, none };

PunctPolicy parse_punct_policy(std::string_view name);
const char* punct_policy_name(PunctPolicy policy);

/// PTB punctuation tags `` '' , . : plus the CTB tag PU.
const std::vector<std::string>& default_punct_tags();

bool is_punct(std::string_view token, std::string_view pos, PunctPolicy policy);
bool is_punct(std::string_view token, std::string_view pos, PunctPolicy policy,
              const std::vector<std::string>& ptb_ctb_tags);

/// Token-level punctuation mask for a sentence: ud checks UPOS, ptb_ctb
/// checks XPOS and falls back to UPOS when XPOS is "_".
std::vector<bool> punct_mask(const Sentence& s, PunctPolicy policy);

/// ASCII lowercasing; other bytes pass through unchanged.
std::string lowercase(std::string_view s);

/// Splits a UTF-8 word into code-point strings.
std::vector<std::string> utf8_chars(std::string_view word);

}  // namespace stackptr
