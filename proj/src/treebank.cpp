#include "stackptr/treebank.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "stackptr/error.hpp"
#include "stackptr/tree_oracle.hpp"

namespace stackptr {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) return std::nullopt;
  return v;
}

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": " + what);
}

struct PendingToken {
  std::size_t line;
  std::string form, upos, xpos, label;
  int head;
};

TreebankEntry finish_block(const std::vector<PendingToken>& tokens, bool trees) {
  TreebankEntry e;
  const std::size_t n = tokens.size();
  e.sentence.words.assign(1, kRootWord);
  e.sentence.upos.assign(1, kRootWord);
  e.sentence.xpos.assign(1, kRootWord);
  e.tree.heads.assign(1, kNone);
  e.tree.labels.assign(1, "");
  for (const PendingToken& t : tokens) {
    if (trees && (t.head < 0 || static_cast<std::size_t>(t.head) > n)) {
      fail_line(t.line, "head index " + std::to_string(t.head) + " out of range for a " + std::to_string(n) +
                            "-word sentence");
    }
    e.sentence.words.push_back(t.form);
    e.sentence.upos.push_back(t.upos);
    e.sentence.xpos.push_back(t.xpos);
    e.tree.heads.push_back(t.head);
    e.tree.labels.push_back(t.label);
  }
  if (!trees) return e;
  if (auto v = validate(e.tree.heads)) {
    fail_line(tokens[static_cast<std::size_t>(std::max(v->index, 1)) - 1].line,
              "invalid gold tree in sentence starting at line " + std::to_string(tokens.front().line) + ": " +
                  v->message);
  }
  return e;
}

bool bad_field_char(std::string_view s) { return s.find_first_of("\t\n\r") != std::string_view::npos; }

}  // namespace

ConllFormat parse_conll_format(std::string_view name) {
  if (name == "conllx") return ConllFormat::conllx;
  if (name == "conllu") return ConllFormat::conllu;
  throw std::invalid_argument("unknown CoNLL format: " + std::string(name));
}

std::vector<TreebankEntry> read_conll(std::string_view text, ConllFormat format, ReadMode mode) {
  const bool trees = mode == ReadMode::trees;
  std::vector<TreebankEntry> out;
  std::vector<PendingToken> block;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    const bool last = nl == std::string_view::npos;
    std::string_view line = text.substr(pos, last ? std::string_view::npos : nl - pos);
    pos = last ? text.size() + 1 : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) {
      if (!block.empty()) {
        out.push_back(finish_block(block, trees));
        block.clear();
      }
      continue;
    }
    if (line.front() == '#') continue;

    const auto cols = split_tabs(line);
    if (cols.size() != 10) {
      fail_line(line_no, "expected 10 tab-separated columns, found " + std::to_string(cols.size()));
    }
    if (format == ConllFormat::conllu && cols[0].find_first_of("-.") != std::string_view::npos) continue;

    const auto id = parse_int(cols[0]);
    if (!id) fail_line(line_no, "non-integer token id '" + std::string(cols[0]) + "'");
    if (*id != static_cast<int>(block.size()) + 1) {
      fail_line(line_no, "token id " + std::to_string(*id) + " is not contiguous (expected " +
                             std::to_string(block.size() + 1) + ")");
    }
    std::optional<int> head = 0;
    if (trees) {
      head = parse_int(cols[6]);
      if (!head) fail_line(line_no, "non-integer head '" + std::string(cols[6]) + "'");
    }
    block.push_back(PendingToken{line_no, std::string(cols[1]), std::string(cols[3]), std::string(cols[4]),
                                 trees ? std::string(cols[7]) : std::string("_"), *head});
  }
  if (!block.empty()) out.push_back(finish_block(block, trees));
  return out;
}

std::vector<TreebankEntry> read_conll_file(const std::string& path, ConllFormat format, ReadMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return read_conll(ss.str(), format, mode);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string write_conll(const std::vector<TreebankEntry>& entries, ConllFormat /*format*/,
                        const std::vector<std::string>& comments) {
  std::string out;
  for (std::size_t s = 0; s < entries.size(); ++s) {
    const auto& [sent, tree] = entries[s];
    const std::size_t n = sent.size();
    if (tree.heads.size() != n + 1 || tree.labels.size() != n + 1 || sent.upos.size() != n + 1 ||
        sent.xpos.size() != n + 1) {
      throw DataError("write_conll: sentence " + std::to_string(s + 1) + " has inconsistent column lengths");
    }
    if (auto v = validate(tree.heads)) {
      throw DataError("write_conll: sentence " + std::to_string(s + 1) + " has an invalid tree: " + v->message);
    }
    if (s < comments.size() && !comments[s].empty()) out += "# " + comments[s] + "\n";
    for (std::size_t i = 1; i <= n; ++i) {
      const std::string& label = tree.labels[i];
      if (label.empty() || label.find_first_of(" \t\n\r") != std::string::npos) {
        throw DataError("write_conll: sentence " + std::to_string(s + 1) + " word " + std::to_string(i) +
                        ": label '" + label + "' cannot be encoded in a column");
      }
      const std::string& form = sent.words[i];
      if (form.empty() || bad_field_char(form) || bad_field_char(sent.upos[i]) || bad_field_char(sent.xpos[i])) {
        throw DataError("write_conll: sentence " + std::to_string(s + 1) + " word " + std::to_string(i) +
                        ": field cannot be encoded in a column");
      }
      const std::string& upos = sent.upos[i].empty() ? std::string("_") : sent.upos[i];
      const std::string& xpos = sent.xpos[i].empty() ? std::string("_") : sent.xpos[i];
      out += std::to_string(i);
      out += '\t';
      out += form;
      out += "\t_\t";
      out += upos;
      out += '\t';
      out += xpos;
      out += "\t_\t";
      out += std::to_string(tree.heads[i]);
      out += '\t';
      out += label;
      out += "\t_\t_\n";
    }
    out += '\n';
  }
  return out;
}

PunctPolicy parse_punct_policy(std::string_view name) {
  if (name == "ptb_ctb") return PunctPolicy::ptb_ctb;
  if (name == "ud") return PunctPolicy::ud;
  if (name == "none") return PunctPolicy::none;
  throw std::invalid_argument("unknown punctuation policy: " + std::string(name));
}

const char* punct_policy_name(PunctPolicy policy) {
  switch (policy) {
    case PunctPolicy::ptb_ctb: return "ptb_ctb";
    case PunctPolicy::ud: return "ud";
    case PunctPolicy::none: return "none";
  }
  return "none";
}

const std::vector<std::string>& default_punct_tags() {
  static const std::vector<std::string> tags{"``", "''", ",", ".", ":", "PU"};
  return tags;
}

bool is_punct(std::string_view token, std::string_view pos, PunctPolicy policy) {
  return is_punct(token, pos, policy, default_punct_tags());
}

bool is_punct(std::string_view /*token*/, std::string_view pos, PunctPolicy policy,
              const std::vector<std::string>& ptb_ctb_tags) {
  switch (policy) {
    case PunctPolicy::ud: return pos == "PUNCT" || pos == "SYM";
    case PunctPolicy::ptb_ctb:
      return std::find(ptb_ctb_tags.begin(), ptb_ctb_tags.end(), pos) != ptb_ctb_tags.end();
    case PunctPolicy::none: return false;
  }
  return false;
}

std::vector<bool> punct_mask(const Sentence& s, PunctPolicy policy) {
  std::vector<bool> mask(s.words.size(), false);
  for (std::size_t i = 1; i < s.words.size(); ++i) {
    std::string_view pos = s.upos[i];
    if (policy == PunctPolicy::ptb_ctb && s.xpos[i] != "_" && !s.xpos[i].empty()) pos = s.xpos[i];
    mask[i] = is_punct(s.words[i], pos, policy);
  }
  return mask;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::vector<std::string> utf8_chars(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const auto b = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if ((b & 0xE0) == 0xC0) len = 2;
    else if ((b & 0xF0) == 0xE0) len = 3;
    else if ((b & 0xF8) == 0xF0) len = 4;
    if (i + len > word.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k)
      if ((static_cast<unsigned char>(word[i + k]) & 0xC0) != 0x80) len = 1;
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace stackptr
