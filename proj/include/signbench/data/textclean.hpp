#pragma once

#include <cctype>
#include <string>
#include <vector>

namespace signbench {

namespace detail {

inline void append_utf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

inline std::string decode_html_entities(const std::string& s) {
  static const std::vector<std::pair<std::string, std::string>> named = {
      {"&lt;", "<"},   {"&gt;", ">"},    {"&quot;", "\""}, {"&apos;", "'"},
      {"&nbsp;", " "}, {"&amp;", "&"},
  };
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '&') {
      bool matched = false;
      for (const auto& [ent, rep] : named) {
        if (s.compare(i, ent.size(), ent) == 0) {
          out += rep;
          i += ent.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
      if (i + 2 < s.size() && s[i + 1] == '#') {
        size_t j = i + 2;
        bool hex = j < s.size() && (s[j] == 'x' || s[j] == 'X');
        if (hex) ++j;
        unsigned long cp = 0;
        size_t digits = 0;
        while (j < s.size() && digits < 7) {
          char c = s[j];
          int d;
          if (c >= '0' && c <= '9') d = c - '0';
          else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
          else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
          else break;
          cp = cp * (hex ? 16 : 10) + static_cast<unsigned long>(d);
          ++j;
          ++digits;
        }
        if (digits > 0 && j < s.size() && s[j] == ';') {
          append_utf8(out, cp);
          i = j + 1;
          continue;
        }
      }
    }
    out += s[i++];
  }
  return out;
}

inline std::string strip_html_tags(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '<') {
      size_t close = s.find('>', i + 1);
      if (close != std::string::npos) {
        i = close + 1;
        continue;
      }
    }
    out += s[i++];
  }
  return out;
}

// Removes non-verbal annotations: (laughter), [music], *flush*.
inline std::string strip_annotations(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    char close = c == '(' ? ')' : c == '[' ? ']' : c == '*' ? '*' : '\0';
    if (close != '\0') {
      size_t end = s.find(close, i + 1);
      if (end != std::string::npos) {
        i = end + 1;
        continue;
      }
    }
    out += s[i++];
  }
  return out;
}

inline std::string trim_ws(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string strip_leading_symbols(const std::string& s) {
  static const std::vector<std::string> symbols = {"♪", "•", "-"};
  std::string out = s;
  bool changed = true;
  while (changed) {
    changed = false;
    size_t b = out.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    for (const std::string& sym : symbols) {
      if (out.compare(b, sym.size(), sym) == 0) {
        out.erase(0, b + sym.size());
        changed = true;
        break;
      }
    }
  }
  return out;
}

// Drops "John:" style identifiers: a single alphabetic word followed by a
// colon at the start of the line.
inline std::string strip_speaker(const std::string& s) {
  std::string t = trim_ws(s);
  size_t i = 0;
  while (i < t.size() && std::isalpha(static_cast<unsigned char>(t[i]))) ++i;
  if (i > 0 && i < t.size() && t[i] == ':') return t.substr(i + 1);
  return t;
}

inline std::string tidy_spacing(const std::string& s) {
  // delete spaces before punctuation, collapse runs, trim
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (ws) {
      size_t j = i;
      while (j < s.size() && (s[j] == ' ' || s[j] == '\t' || s[j] == '\n' || s[j] == '\r')) ++j;
      bool punct_next =
          j < s.size() && (s[j] == '.' || s[j] == ',' || s[j] == '!' || s[j] == '?' ||
                           s[j] == ';' || s[j] == ':');
      if (!punct_next && !out.empty() && j < s.size()) out += ' ';
      i = j - 1;
    } else {
      out += c;
    }
  }
  return trim_ws(out);
}

inline std::string trim_quotes(const std::string& s) {
  static const std::vector<std::string> quotes = {"\"", "'", "“", "”", "‘",
                                                  "’"};
  std::string out = s;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const std::string& q : quotes) {
      if (out.size() >= q.size() && out.compare(0, q.size(), q) == 0) {
        out.erase(0, q.size());
        changed = true;
      }
      if (out.size() >= q.size() && out.compare(out.size() - q.size(), q.size(), q) == 0) {
        out.erase(out.size() - q.size());
        changed = true;
      }
    }
    if (changed) out = trim_ws(out);
  }
  return out;
}

inline std::string clean_text_once(const std::string& raw) {
  std::string s = decode_html_entities(raw);
  s = strip_html_tags(s);
  s = strip_annotations(s);
  s = strip_leading_symbols(s);
  s = strip_speaker(s);
  s = tidy_spacing(s);
  s = trim_quotes(s);
  return s;
}

}  // namespace detail

// Subtitle text cleaning. The stage pipeline runs to a fixpoint (every stage
// only shrinks or keeps the string, so this terminates), which makes the
// whole function idempotent: clean(clean(s)) == clean(s) for any input.
inline std::string clean_text(const std::string& raw) {
  std::string cur = raw;
  for (int iter = 0; iter < 64; ++iter) {
    std::string next = detail::clean_text_once(cur);
    if (next == cur) return cur;
    cur = std::move(next);
  }
  return cur;
}

}  // namespace signbench
