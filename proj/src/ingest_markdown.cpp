// Markdown to hierarchy-preserving plain text.
//
// This is a line-oriented reader, not a CommonMark implementation. It covers
// the constructs that appear in contributing guides (ATX/setext headings,
// fenced and indented code, lists, pipe tables, block quotes, inline links and
// reference links) and degrades everything else to paragraphs.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "ontree/ingest.hpp"
#include "text_util.hpp"

namespace ontree {

namespace {

using detail::collapse_ws;
using detail::is_space;
using detail::trim;

// True when nothing but link/image syntax and separators remains, as in
// navigation lines ("[Next](b.md) | [Up](../README.md)") and badge rows.
bool only_links(const std::string& raw) {
  // Innermost first, so badge links "[![alt](img)](url)" collapse fully.
  static const std::regex links(R"(!?\[[^\[\]]*\](?:\([^)]*\)|\[[^\]]*\])|<[a-zA-Z][a-zA-Z0-9+.-]*:[^>\s]*>)");
  std::string rest = raw;
  for (std::string next; (next = std::regex_replace(rest, links, " ")) != rest;) rest = next;
  return std::none_of(rest.begin(), rest.end(), [](unsigned char c) { return std::isalnum(c) != 0; });
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// ---------------------------------------------------------------------------
// Inline scanning shared by link extraction and formatting removal.

// Finds the ']' matching the '[' at `open`, honouring nesting and code spans.
std::size_t match_bracket(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\\') {
      ++i;
      continue;
    }
    if (c == '[') ++depth;
    if (c == ']' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

// Finds the ')' matching the '(' at `open`.
std::size_t match_paren(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\\') {
      ++i;
      continue;
    }
    if (c == '\n') return std::string_view::npos;
    if (c == '(') ++depth;
    if (c == ')' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

// "(target "title")" body -> target
std::string link_destination(std::string_view inside) {
  auto t = trim(inside);
  if (!t.empty() && t.front() == '<') {
    auto close = t.find('>');
    if (close != std::string_view::npos) return std::string(t.substr(1, close - 1));
  }
  auto ws = t.find_first_of(" \t\n");
  return std::string(t.substr(0, ws));
}

std::size_t backtick_run(std::string_view s, std::size_t i) {
  std::size_t n = 0;
  while (i + n < s.size() && s[i + n] == '`') ++n;
  return n;
}

// Returns the index of a closing backtick run of exactly `n` after `from`.
std::size_t find_code_close(std::string_view s, std::size_t from, std::size_t n) {
  std::size_t i = from;
  while (i < s.size()) {
    if (s[i] == '`') {
      auto run = backtick_run(s, i);
      if (run == n) return i;
      i += run;
    } else {
      ++i;
    }
  }
  return std::string_view::npos;
}

bool looks_like_autolink(std::string_view inner) {
  if (inner.empty() || inner.find_first_of(" \t\n<>") != std::string_view::npos) return false;
  if (inner.find("://") != std::string_view::npos) return true;
  return inner.rfind("mailto:", 0) == 0 ||
         (inner.find('@') != std::string_view::npos && inner.find('.') != std::string_view::npos);
}

// Length of an HTML tag starting at `i` ("<div ...>", "</a>", "<br/>"), or 0.
std::size_t html_tag_length(std::string_view s, std::size_t i) {
  if (s[i] != '<' || i + 1 >= s.size()) return 0;
  std::size_t j = i + 1;
  if (s[j] == '/') ++j;
  if (j >= s.size() || !std::isalpha(static_cast<unsigned char>(s[j]))) return 0;
  while (j < s.size() && (is_alnum(s[j]) || s[j] == '-')) ++j;
  if (j >= s.size()) return 0;
  if (s[j] != '>' && s[j] != '/' && !is_space(s[j])) return 0;
  auto close = s.find('>', j);
  if (close == std::string_view::npos || s.substr(j, close - j).find('\n') != std::string_view::npos)
    return 0;
  return close - i + 1;
}

// One pass of formatting removal. Code-span contents are copied verbatim in
// this pass; strip_formatting iterates to a fixed point.
std::string strip_pass(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::vector<bool> protected_char;
  protected_char.reserve(s.size());
  auto emit = [&](std::string_view piece, bool prot) {
    out.append(piece);
    protected_char.insert(protected_char.end(), piece.size(), prot);
  };

  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == '`') {
      auto n = backtick_run(s, i);
      auto close = find_code_close(s, i + n, n);
      if (close != std::string_view::npos) {
        auto content = s.substr(i + n, close - i - n);
        if (content.size() >= 2 && content.front() == ' ' && content.back() == ' ' &&
            trim(content).size() > 0)
          content = content.substr(1, content.size() - 2);
        emit(content, true);
        i = close + n;
        continue;
      }
      emit(s.substr(i, n), false);
      i += n;
      continue;
    }
    if (c == '!' && i + 1 < s.size() && s[i + 1] == '[') {
      auto close = match_bracket(s, i + 1);
      if (close != std::string_view::npos && close + 1 < s.size() &&
          (s[close + 1] == '(' || s[close + 1] == '[')) {
        auto end = s[close + 1] == '(' ? match_paren(s, close + 1) : s.find(']', close + 2);
        if (end != std::string_view::npos) {
          emit(s.substr(i + 2, close - i - 2), false);
          i = end + 1;
          continue;
        }
      }
    }
    if (c == '[') {
      auto close = match_bracket(s, i);
      if (close != std::string_view::npos && close + 1 < s.size()) {
        std::size_t end = std::string_view::npos;
        bool indexing = i > 0 && is_alnum(s[i - 1]);
        if (s[close + 1] == '(') end = match_paren(s, close + 1);
        else if (s[close + 1] == '[' && !indexing) end = s.find(']', close + 2);
        if (end != std::string_view::npos) {
          emit(s.substr(i + 1, close - i - 1), false);
          i = end + 1;
          continue;
        }
      }
    }
    if (c == '<') {
      auto close = s.find('>', i + 1);
      if (close != std::string_view::npos && looks_like_autolink(s.substr(i + 1, close - i - 1))) {
        emit(s.substr(i + 1, close - i - 1), false);
        i = close + 1;
        continue;
      }
      if (auto len = html_tag_length(s, i); len > 0) {
        i += len;
        continue;
      }
    }
    emit(s.substr(i, 1), false);
    ++i;
  }

  // Emphasis: remove matched delimiter runs of '*', '_' (1-3) and '~~'.
  std::vector<bool> drop(out.size(), false);
  auto run_length = [&](std::size_t p) {
    std::size_t n = 0;
    while (p + n < out.size() && out[p + n] == out[p] && !protected_char[p + n]) ++n;
    return n;
  };
  for (std::size_t p = 0; p < out.size();) {
    char d = out[p];
    if (protected_char[p] || drop[p] || (d != '*' && d != '_' && d != '~')) {
      ++p;
      continue;
    }
    auto n = run_length(p);
    bool ok_len = d == '~' ? n == 2 : n <= 3;
    char next = p + n < out.size() ? out[p + n] : ' ';
    char prev = p > 0 ? out[p - 1] : ' ';
    bool opener = ok_len && !is_space(next) && (d != '_' || !is_alnum(prev));
    if (!opener) {
      p += n;
      continue;
    }
    for (std::size_t q = p + n; q < out.size();) {
      if (out[q] != d || protected_char[q] || drop[q]) {
        ++q;
        continue;
      }
      auto m = run_length(q);
      char before = out[q - 1];
      char after = q + m < out.size() ? out[q + m] : ' ';
      if (m == n && q > p + n && !is_space(before) && (d != '_' || !is_alnum(after))) {
        for (std::size_t k = 0; k < n; ++k) drop[p + k] = drop[q + k] = true;
        break;
      }
      q += m;
    }
    p += n;
  }
  std::string result;
  result.reserve(out.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    if (!drop[k]) result.push_back(out[k]);
  return result;
}

// ---------------------------------------------------------------------------
// Link extraction.

void scan_links(std::string_view s, const std::map<std::string, std::string>& refs,
                std::vector<std::string>& targets) {
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (c == '`') {
      auto n = backtick_run(s, i);
      auto close = find_code_close(s, i + n, n);
      i = close == std::string_view::npos ? i + n : close + n;
      continue;
    }
    if (c == '[') {
      auto close = match_bracket(s, i);
      if (close != std::string_view::npos) {
        // Nested image/link inside the anchor text, e.g. badges.
        scan_links(s.substr(i + 1, close - i - 1), refs, targets);
        if (close + 1 < s.size() && s[close + 1] == '(') {
          auto end = match_paren(s, close + 1);
          if (end != std::string_view::npos) {
            auto dest = link_destination(s.substr(close + 2, end - close - 2));
            if (!dest.empty()) targets.push_back(dest);
            i = end + 1;
            continue;
          }
        }
        std::string label;
        std::size_t after = close + 1;
        if (close + 1 < s.size() && s[close + 1] == '[') {
          auto end = s.find(']', close + 2);
          if (end != std::string_view::npos) {
            label = std::string(s.substr(close + 2, end - close - 2));
            after = end + 1;
          }
        }
        if (label.empty()) label = std::string(s.substr(i + 1, close - i - 1));
        auto it = refs.find(detail::lower(collapse_ws(label)));
        if (it != refs.end()) targets.push_back(it->second);
        i = after;
        continue;
      }
    }
    if (c == '<') {
      auto close = s.find('>', i + 1);
      if (close != std::string_view::npos) {
        auto inner = s.substr(i + 1, close - i - 1);
        if (looks_like_autolink(inner) && inner.find("://") != std::string_view::npos) {
          targets.emplace_back(inner);
          i = close + 1;
          continue;
        }
        // href="..." / src="..." inside raw HTML
        for (std::string_view attr : {"href=\"", "src=\""}) {
          auto a = inner.find(attr);
          if (a != std::string_view::npos) {
            auto start = a + attr.size();
            auto q = inner.find('"', start);
            if (q != std::string_view::npos) targets.emplace_back(inner.substr(start, q - start));
          }
        }
        i = close + 1;
        continue;
      }
    }
    if ((c == 'h' || c == 'H') && (s.substr(i, 7) == "http://" || s.substr(i, 8) == "https://") &&
        (i == 0 || !is_alnum(s[i - 1]))) {
      auto end = i;
      while (end < s.size() && !is_space(s[end]) && s[end] != '<' && s[end] != '>' &&
             s[end] != '"' && s[end] != '\'')
        ++end;
      auto url = s.substr(i, end - i);
      while (!url.empty() && std::string_view(".,;:)!?*_").find(url.back()) != std::string_view::npos)
        url.remove_suffix(1);
      targets.emplace_back(url);
      i = end;
      continue;
    }
    ++i;
  }
}

// ---------------------------------------------------------------------------
// Block reader.

struct Line {
  std::string text;
  int number;  // 1-based
};

std::size_t leading_spaces(std::string_view s) {
  std::size_t n = 0;
  for (char c : s) {
    if (c == ' ') ++n;
    else if (c == '\t') n += 4;
    else break;
  }
  return n;
}

struct Fence {
  char ch;
  std::size_t len;
};

std::optional<Fence> fence_open(std::string_view line) {
  if (leading_spaces(line) > 3) return std::nullopt;
  auto t = detail::ltrim(line);
  if (t.empty() || (t[0] != '`' && t[0] != '~')) return std::nullopt;
  std::size_t n = 0;
  while (n < t.size() && t[n] == t[0]) ++n;
  if (n < 3) return std::nullopt;
  if (t[0] == '`' && t.substr(n).find('`') != std::string_view::npos) return std::nullopt;
  return Fence{t[0], n};
}

bool fence_close(std::string_view line, const Fence& f) {
  if (leading_spaces(line) > 3) return false;
  auto t = trim(line);
  if (t.size() < f.len) return false;
  return std::all_of(t.begin(), t.end(), [&](char c) { return c == f.ch; });
}

struct Heading {
  int level;
  std::string text;
};

std::optional<Heading> atx_heading(std::string_view line) {
  if (leading_spaces(line) > 3) return std::nullopt;
  auto t = detail::ltrim(line);
  int level = 0;
  while (level < static_cast<int>(t.size()) && t[level] == '#') ++level;
  if (level == 0 || level > 6) return std::nullopt;
  if (level < static_cast<int>(t.size()) && !is_space(t[level])) return std::nullopt;
  auto content = trim(t.substr(level));
  // optional closing sequence
  auto end = content.size();
  while (end > 0 && content[end - 1] == '#') --end;
  if (end == 0 || is_space(content[end - 1])) content = trim(content.substr(0, end));
  return Heading{level, std::string(content)};
}

bool thematic_break(std::string_view line) {
  if (leading_spaces(line) > 3) return false;
  auto t = trim(line);
  if (t.empty()) return false;
  char c = t[0];
  if (c != '-' && c != '*' && c != '_') return false;
  int count = 0;
  for (char x : t) {
    if (x == c) ++count;
    else if (!is_space(x)) return false;
  }
  return count >= 3;
}

int setext_level(std::string_view line) {
  if (leading_spaces(line) > 3) return 0;
  auto t = trim(line);
  if (t.empty()) return 0;
  if (std::all_of(t.begin(), t.end(), [](char c) { return c == '='; })) return 1;
  if (std::all_of(t.begin(), t.end(), [](char c) { return c == '-'; })) return 2;
  return 0;
}

// Returns the item content if the line opens a list item.
std::optional<std::string> list_item(std::string_view line) {
  auto indent = leading_spaces(line);
  auto t = detail::ltrim(line);
  if (t.empty()) return std::nullopt;
  std::size_t marker = 0;
  if (t[0] == '-' || t[0] == '*' || t[0] == '+') {
    marker = 1;
  } else {
    while (marker < t.size() && marker < 9 && std::isdigit(static_cast<unsigned char>(t[marker])))
      ++marker;
    if (marker == 0 || marker >= t.size() || (t[marker] != '.' && t[marker] != ')'))
      return std::nullopt;
    ++marker;
  }
  if (marker < t.size() && !is_space(t[marker])) return std::nullopt;
  if (indent > 12) return std::nullopt;
  auto content = detail::ltrim(t.substr(marker));
  for (std::string_view box : {"[ ] ", "[x] ", "[X] "})
    if (content.substr(0, box.size()) == box) content = content.substr(box.size());
  return std::string(content);
}

bool is_table_line(std::string_view line) {
  auto t = trim(line);
  return t.size() >= 2 && t.front() == '|';
}

bool is_table_separator(std::string_view line) {
  auto t = trim(line);
  if (t.empty()) return false;
  return std::all_of(t.begin(), t.end(),
                     [](char c) { return c == '|' || c == '-' || c == ':' || is_space(c); }) &&
         t.find('-') != std::string_view::npos;
}

std::string table_row_text(std::string_view line) {
  auto t = trim(line);
  if (!t.empty() && t.front() == '|') t.remove_prefix(1);
  if (!t.empty() && t.back() == '|') t.remove_suffix(1);
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= t.size(); ++i) {
    if (i == t.size() || (t[i] == '|' && (i == 0 || t[i - 1] != '\\'))) {
      cells.push_back(collapse_ws(strip_formatting(trim(t.substr(start, i - start)))));
      start = i + 1;
    }
  }
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += " | ";
    out += cells[i];
  }
  return out;
}

std::optional<std::pair<std::string, std::string>> reference_definition(std::string_view line) {
  if (leading_spaces(line) > 3) return std::nullopt;
  auto t = detail::ltrim(line);
  if (t.empty() || t[0] != '[') return std::nullopt;
  auto close = t.find("]:");
  if (close == std::string_view::npos || close < 2) return std::nullopt;
  auto label = t.substr(1, close - 1);
  if (label.find('[') != std::string_view::npos) return std::nullopt;
  auto dest = link_destination(t.substr(close + 2));
  if (dest.empty()) return std::nullopt;
  return std::make_pair(detail::lower(collapse_ws(label)), dest);
}

class BlockReader {
 public:
  BlockReader(const SourceLocator& locator, std::string file) : locator_(locator), file_(std::move(file)) {}

  Document read(std::string_view text) {
    auto lines = split_lines(text);
    std::size_t first = skip_front_matter(lines);
    auto consumed = collect_references(lines, first);

    std::optional<Fence> fence;
    std::vector<Line> fence_lines;
    int fence_start = 0;
    bool in_comment = false;

    for (std::size_t idx = first; idx < lines.size(); ++idx) {
      const auto& line = lines[idx];
      std::string_view s = line.text;

      if (fence) {
        if (fence_close(s, *fence)) {
          emit_code(fence_lines, fence_start, line.number);
          fence.reset();
          fence_lines.clear();
        } else {
          fence_lines.push_back(line);
        }
        continue;
      }
      if (in_comment) {
        if (s.find("-->") != std::string_view::npos) in_comment = false;
        continue;
      }
      if (consumed[idx]) {
        flush();
        continue;
      }
      if (trim(s).empty()) {
        flush();
        continue;
      }
      if (auto f = fence_open(s)) {
        flush();
        fence = f;
        fence_start = line.number;
        continue;
      }
      if (trim(s).rfind("<!--", 0) == 0) {
        flush();
        if (s.find("-->") == std::string_view::npos) in_comment = true;
        continue;
      }
      if (auto h = atx_heading(s)) {
        flush();
        emit_heading(h->level, h->text, line.number, line.number);
        continue;
      }
      if (mode_ == Mode::paragraph && !pending_.empty()) {
        if (int level = setext_level(s)) {
          std::string joined;
          for (const auto& p : pending_) joined += (joined.empty() ? "" : " ") + std::string(trim(p.text));
          int start = pending_.front().number;
          pending_.clear();
          mode_ = Mode::none;
          emit_heading(level, joined, start, line.number);
          continue;
        }
      }
      if (thematic_break(s)) {
        flush();
        continue;
      }
      if (is_table_line(s) && mode_ != Mode::table) {
        flush();
        mode_ = Mode::table;
      }
      if (mode_ == Mode::table) {
        if (is_table_line(s)) {
          pending_.push_back(line);
          continue;
        }
        flush();
      }
      if (auto item = list_item(s)) {
        flush();
        mode_ = Mode::list;
        pending_.push_back(Line{*item, line.number});
        continue;
      }
      if (mode_ == Mode::none && leading_spaces(s) >= 4) {
        mode_ = Mode::indented_code;
      }
      if (mode_ == Mode::indented_code) {
        if (leading_spaces(s) >= 4) {
          pending_.push_back(line);
          continue;
        }
        flush();
      }
      std::string content(detail::ltrim(s));
      while (!content.empty() && content[0] == '>') {
        content.erase(0, 1);
        content = std::string(detail::ltrim(content));
      }
      if (mode_ == Mode::none) mode_ = Mode::paragraph;
      pending_.push_back(Line{content, line.number});
    }
    if (fence) {
      // Unclosed fence: the rest of the file is code.
      int last = lines.empty() ? fence_start : lines.back().number;
      emit_code(fence_lines, fence_start, last);
    }
    flush();
    return std::move(doc_);
  }

 private:
  enum class Mode { none, paragraph, list, table, indented_code };

  static std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    int number = 1;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto nl = text.find('\n', start);
      auto end = nl == std::string_view::npos ? text.size() : nl;
      std::string_view l = text.substr(start, end - start);
      if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
      if (nl == std::string_view::npos && l.empty()) break;
      lines.push_back(Line{std::string(l), number++});
      if (nl == std::string_view::npos) break;
      start = nl + 1;
    }
    return lines;
  }

  static std::size_t skip_front_matter(const std::vector<Line>& lines) {
    if (lines.empty() || trim(lines[0].text) != "---") return 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      auto t = trim(lines[i].text);
      if (t == "---" || t == "...") return i + 1;
    }
    return 0;
  }

  std::vector<bool> collect_references(const std::vector<Line>& lines, std::size_t first) {
    std::vector<bool> consumed(lines.size(), false);
    std::optional<Fence> fence;
    for (std::size_t i = first; i < lines.size(); ++i) {
      if (fence) {
        if (fence_close(lines[i].text, *fence)) fence.reset();
        continue;
      }
      if (auto f = fence_open(lines[i].text)) {
        fence = f;
        continue;
      }
      if (auto def = reference_definition(lines[i].text)) {
        refs_.emplace(def->first, def->second);
        consumed[i] = true;
      }
    }
    return consumed;
  }

  void add_outlinks(Block& block, std::string_view raw) {
    std::vector<std::string> targets;
    scan_links(raw, refs_, targets);
    for (const auto& t : targets) {
      auto loc = resolve_link(locator_, t);
      if (!loc) continue;
      bool dup = std::any_of(block.outlinks.begin(), block.outlinks.end(),
                             [&](const SourceLocator& o) { return o.value == loc->value; });
      if (!dup) block.outlinks.push_back(*loc);
    }
  }

  Block make_block(BlockKind kind, int start, int end) const {
    Block b;
    b.kind = kind;
    b.span = SourceSpan{file_, start, end};
    return b;
  }

  void emit_heading(int level, std::string_view raw, int start, int end) {
    Block b = make_block(BlockKind::heading, start, end);
    b.heading_level = level;
    b.text = collapse_ws(strip_formatting(raw));
    add_outlinks(b, raw);
    if (b.text.empty()) return;
    doc_.blocks.push_back(std::move(b));
  }

  void emit_code(const std::vector<Line>& lines, int start, int end) {
    std::string text;
    for (const auto& l : lines) {
      if (&l != &lines.front()) text += '\n';
      text += l.text;
    }
    while (!text.empty() && (text.back() == '\n' || is_space(text.back()))) text.pop_back();
    if (trim(text).empty()) return;
    Block b = make_block(BlockKind::code, start, end);
    b.text = std::move(text);
    doc_.blocks.push_back(std::move(b));
  }

  void flush() {
    if (pending_.empty()) {
      mode_ = Mode::none;
      return;
    }
    int start = pending_.front().number;
    int end = pending_.back().number;
    std::string raw;
    for (const auto& p : pending_) raw += (raw.empty() ? "" : "\n") + p.text;

    switch (mode_) {
      case Mode::indented_code: {
        std::vector<Line> code;
        for (const auto& p : pending_) {
          std::string_view t = p.text;
          std::size_t strip = 0;
          std::size_t width = 0;
          while (strip < t.size() && width < 4 && (t[strip] == ' ' || t[strip] == '\t')) {
            width += t[strip] == '\t' ? 4 : 1;
            ++strip;
          }
          code.push_back(Line{std::string(t.substr(strip)), p.number});
        }
        emit_code(code, start, end);
        break;
      }
      case Mode::table: {
        Block b = make_block(BlockKind::table, start, end);
        std::string text;
        for (const auto& p : pending_) {
          if (is_table_separator(p.text)) continue;
          auto row = table_row_text(p.text);
          if (trim(row).empty()) continue;
          text += (text.empty() ? "" : "\n") + row;
        }
        b.text = text;
        add_outlinks(b, raw);
        if (!b.text.empty() || !b.outlinks.empty()) doc_.blocks.push_back(std::move(b));
        break;
      }
      case Mode::list:
      case Mode::paragraph:
      case Mode::none: {
        Block b = make_block(mode_ == Mode::list ? BlockKind::list_item : BlockKind::paragraph, start, end);
        std::string joined;
        for (const auto& p : pending_) joined += (joined.empty() ? "" : " ") + std::string(trim(p.text));
        b.text = collapse_ws(strip_formatting(joined));
        add_outlinks(b, raw);
        if (!b.outlinks.empty() && only_links(joined)) b.kind = BlockKind::link_only;
        if (!b.text.empty() || !b.outlinks.empty()) doc_.blocks.push_back(std::move(b));
        break;
      }
    }
    pending_.clear();
    mode_ = Mode::none;
  }

  const SourceLocator& locator_;
  std::string file_;
  std::map<std::string, std::string> refs_;
  Document doc_;
  Mode mode_ = Mode::none;
  std::vector<Line> pending_;
};

}  // namespace

std::string strip_formatting(std::string_view text) {
  std::string current(text);
  for (;;) {
    auto next = strip_pass(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

Document parse_markdown(std::string_view text, const SourceLocator& locator, std::string display_name) {
  if (display_name.empty()) display_name = locator.value;
  BlockReader reader(locator, display_name);
  Document doc = reader.read(text);
  doc.locator = locator;
  doc.name = display_name;
  return doc;
}

}  // namespace ontree
