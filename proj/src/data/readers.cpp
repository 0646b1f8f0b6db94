#include "rtdlab/data/readers.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rtdlab/tokenizer/normalize.hpp"

namespace rtdlab {

namespace {

std::string read_whole_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const nlohmann::json& need(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw std::runtime_error("missing field at " + where + "." + key);
  }
  return j.at(key);
}

std::string need_string(const nlohmann::json& j, const char* key, const std::string& where) {
  const auto& v = need(j, key, where);
  if (!v.is_string()) throw std::runtime_error("expected a string at " + where + "." + key);
  return v.get<std::string>();
}

}  // namespace

SquadData read_squad_json(const std::string& path) {
  nlohmann::json doc;
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("malformed JSON in " + path + ": " + e.what());
    }
  }

  SquadData out;
  const auto& data = need(doc, "data", "$");
  if (!data.is_array()) throw std::runtime_error("expected an array at $.data");

  for (std::size_t a = 0; a < data.size(); ++a) {
    const std::string apath = "$.data[" + std::to_string(a) + "]";
    const auto& paragraphs = need(data[a], "paragraphs", apath);
    if (!paragraphs.is_array()) throw std::runtime_error("expected an array at " + apath + ".paragraphs");

    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
      const std::string ppath = apath + ".paragraphs[" + std::to_string(p) + "]";
      const std::string context = need_string(paragraphs[p], "context", ppath);
      const auto context_cps = decode_utf8(context);
      const auto& qas = need(paragraphs[p], "qas", ppath);
      if (!qas.is_array()) throw std::runtime_error("expected an array at " + ppath + ".qas");

      for (std::size_t q = 0; q < qas.size(); ++q) {
        const std::string qpath = ppath + ".qas[" + std::to_string(q) + "]";
        out.report.total += 1;

        QaExample ex;
        ex.id = need_string(qas[q], "id", qpath);
        ex.question = need_string(qas[q], "question", qpath);
        ex.context = context;

        const auto& answers = need(qas[q], "answers", qpath);
        if (!answers.is_array()) throw std::runtime_error("expected an array at " + qpath + ".answers");
        for (std::size_t n = 0; n < answers.size(); ++n) {
          const std::string npath = qpath + ".answers[" + std::to_string(n) + "]";
          QaAnswer ans;
          ans.text = need_string(answers[n], "text", npath);
          const auto& start = need(answers[n], "answer_start", npath);
          if (!start.is_number_integer()) {
            throw std::runtime_error("expected an integer at " + npath + ".answer_start");
          }
          ans.char_start = start.get<std::int64_t>();

          const auto ans_cps = decode_utf8(ans.text);
          const std::int64_t end = ans.char_start + static_cast<std::int64_t>(ans_cps.size());
          const bool in_range = !ans.text.empty() && ans.char_start >= 0 &&
                                end <= static_cast<std::int64_t>(context_cps.size());
          if (in_range &&
              std::equal(ans_cps.begin(), ans_cps.end(),
                         context_cps.begin() + static_cast<std::ptrdiff_t>(ans.char_start))) {
            ex.answers.push_back(std::move(ans));
          } else {
            out.report.notes.push_back(npath + ": answer text not found at answer_start " +
                                       std::to_string(ans.char_start) + " (id " + ex.id + ")");
          }
        }

        if (ex.answers.empty()) {
          out.report.dropped += 1;
          if (answers.empty()) {
            out.report.notes.push_back(qpath + ": no answers (id " + ex.id + ")");
          }
        } else {
          out.report.kept += 1;
          out.examples.push_back(std::move(ex));
        }
      }
    }
  }
  return out;
}

std::vector<NerExample> read_conll(const std::string& path,
                                   const std::vector<std::string>& entity_types) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::set<std::string> known(entity_types.begin(), entity_types.end());
  auto canonical_type = [&](std::string type, std::size_t line_no) {
    if (type == "PERS") type = "PER";  // ANERcorp spelling
    if (!known.count(type)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown entity type \"" +
                               type + "\"");
    }
    return type;
  };

  std::vector<NerExample> out;
  std::vector<std::string> words;
  std::vector<std::pair<std::string, std::size_t>> raw_tags;  // tag, line
  std::size_t line_no = 0;

  auto flush = [&] {
    if (words.empty()) return;
    NerExample ex;
    ex.id = std::to_string(out.size());
    ex.words = std::move(words);
    // IOB2 normalization: a tag continues the previous entity only when the
    // previous token carried the same type; everything else opens a span.
    std::string prev_type;
    ex.tags.reserve(raw_tags.size());
    for (const auto& [raw, at_line] : raw_tags) {
      if (raw == "O") {
        ex.tags.push_back("O");
        prev_type.clear();
        continue;
      }
      bool continuation_marked = raw.size() > 2 && raw[1] == '-' && raw[0] == 'I';
      bool begin_marked = raw.size() > 2 && raw[1] == '-' && raw[0] == 'B';
      std::string type = (continuation_marked || begin_marked) ? raw.substr(2) : raw;
      type = canonical_type(type, at_line);
      bool continues = !begin_marked && prev_type == type;
      ex.tags.push_back((continues ? "I-" : "B-") + type);
      prev_type = type;
    }
    raw_tags.clear();
    words = {};
    out.push_back(std::move(ex));
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string word, tag, extra;
    if (!(fields >> word)) {
      flush();
      continue;
    }
    if (!(fields >> tag) || (fields >> extra)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected exactly word and tag");
    }
    words.push_back(word);
    raw_tags.push_back({tag, line_no});
  }
  flush();
  return out;
}

std::vector<ClsExample> read_tsv_classification(const std::string& path, std::int32_t classes) {
  if (classes <= 0) throw std::invalid_argument("read_tsv_classification: classes must be positive");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file, header expected");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::map<std::string, std::int32_t> names;
  if (line != "text\tlabel") {
    const std::string prefix = "text\tlabel:";
    if (line.rfind(prefix, 0) != 0) {
      throw std::runtime_error(path + ":1: header must be \"text<TAB>label\" with optional "
                               "label names after a colon");
    }
    std::istringstream list(line.substr(prefix.size()));
    std::string name;
    std::int32_t idx = 0;
    while (std::getline(list, name, ',')) names[name] = idx++;
    if (idx != classes) {
      throw std::runtime_error(path + ":1: header declares " + std::to_string(idx) +
                               " label names, expected " + std::to_string(classes));
    }
  }

  std::vector<ClsExample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto first_tab = line.find('\t');
    if (first_tab == std::string::npos || line.find('\t', first_tab + 1) != std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected exactly two tab-separated columns");
    }

    ClsExample ex;
    ex.id = std::to_string(out.size());
    ex.text = line.substr(0, first_tab);
    const std::string label = line.substr(first_tab + 1);

    auto named = names.find(label);
    if (named != names.end()) {
      ex.label = named->second;
    } else {
      std::size_t used = 0;
      int value = -1;
      try {
        value = std::stoi(label, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != label.size()) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": label \"" + label +
                                 "\" is neither an integer nor a declared name");
      }
      ex.label = value;
    }
    if (ex.label < 0 || ex.label >= classes) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": label " +
                               std::to_string(ex.label) + " outside [0, " +
                               std::to_string(classes) + ")");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<std::string> read_corpus_documents(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::vector<std::string> docs;
  std::string line, current;
  auto flush = [&] {
    if (!current.empty()) docs.push_back(std::move(current));
    current = {};
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (blank) {
      flush();
      continue;
    }
    if (!current.empty()) current += '\n';
    current += line;
  }
  flush();
  return docs;
}

namespace {

// RFC-4180 style: quoted fields may contain commas, doubled quotes, and
// newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field = {};
    any = true;
  };
  auto end_row = [&] {
    if (any || !row.empty()) {
      end_field();
      rows.push_back(std::move(row));
      row = {};
      any = false;
      field = {};
    }
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field += c;
        any = true;
    }
  }
  if (quoted) throw std::runtime_error("unterminated quote in CSV input");
  end_row();
  return rows;
}

}  // namespace

std::size_t convert_arsentd(const std::string& csv_path, const std::string& tsv_path) {
  const auto rows = parse_csv(read_whole_file(csv_path));
  if (rows.empty()) throw std::runtime_error(csv_path + ": empty file, header expected");

  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };

  std::ptrdiff_t text_col = -1, label_col = -1;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    const std::string h = lower(rows[0][i]);
    if (h == "tweet") text_col = static_cast<std::ptrdiff_t>(i);
    if (h == "sentiment") label_col = static_cast<std::ptrdiff_t>(i);
  }
  if (text_col < 0 || label_col < 0) {
    throw std::runtime_error(csv_path + ": header must contain Tweet and Sentiment columns");
  }

  // most negative to most positive
  const std::vector<std::string> order = {"very_negative", "negative", "neutral", "positive",
                                          "very_positive"};

  std::ofstream out(tsv_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + tsv_path);
  out << "text\tlabel:very_negative,negative,neutral,positive,very_positive\n";

  std::size_t converted = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (static_cast<std::ptrdiff_t>(row.size()) <= std::max(text_col, label_col)) {
      throw std::runtime_error(csv_path + ": row " + std::to_string(r + 1) +
                               " has too few columns");
    }
    std::string text = row[static_cast<std::size_t>(text_col)];
    const std::string sentiment = lower(row[static_cast<std::size_t>(label_col)]);
    if (std::find(order.begin(), order.end(), sentiment) == order.end()) {
      throw std::runtime_error(csv_path + ": row " + std::to_string(r + 1) +
                               " has unknown sentiment \"" + sentiment + "\"");
    }
    // the TSV format forbids tabs and newlines inside text
    for (char& c : text) {
      if (c == '\t' || c == '\n' || c == '\r') c = ' ';
    }
    out << text << '\t' << sentiment << '\n';
    converted += 1;
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + tsv_path);
  return converted;
}

}  // namespace rtdlab
