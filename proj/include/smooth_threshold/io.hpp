#pragma once

#include "error.hpp"
#include "numeric.hpp"
#include "risk.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

namespace smooth_threshold {

//! Shortest decimal form that parses back to the same double.
inline std::string
format_double(double v)
{
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

//! Strict parse of a whole field as a double; nullopt on anything else.
inline std::optional<double>
parse_double(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  if (s.empty())
    return std::nullopt;
  if (s.front() == '+')
    s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// RFC 4180 CSV

inline std::string
csv_field(const std::string& f, char delim = ',')
{
  if (f.find_first_of(std::string{ delim, '"', '\r', '\n' }) == std::string::npos)
    return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"')
      out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void
write_csv_row(std::ostream& os, const std::vector<std::string>& fields, char delim = ',')
{
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i)
      os << delim;
    os << csv_field(fields[i], delim);
  }
  os << "\r\n";
}

//! Parses records; accepts CRLF or LF endings, quoted fields and a UTF-8 BOM.
inline std::vector<std::vector<std::string>>
read_csv(std::istream& is, char delim = ',')
{
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (text.rfind("\xEF\xBB\xBF", 0) == 0)
    text.erase(0, 3);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  auto end_row = [&]() {
    row.push_back(std::move(field));
    field.clear();
    if (!(row.size() == 1 && row[0].empty()))
      rows.push_back(std::move(row));
    row.clear();
    any = false;
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
    any = true;
    if (c == '"' && field.empty())
      quoted = true;
    else if (c == delim) {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // CRLF handled on the LF
    } else if (c == '\n')
      end_row();
    else
      field += c;
  }
  if (quoted)
    throw InputError("unterminated quoted CSV field");
  if (any || !row.empty() || !field.empty())
    end_row();
  return rows;
}

// ---------------------------------------------------------------------------
// Structured text document: [section] blocks of "key = value" lines and
// [table:name] blocks holding one CSV table each, separated by blank lines.

struct Document
{
  struct Section
  {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;

    void set(const std::string& key, std::string value)
    {
      for (auto& [k, v] : entries)
        if (k == key) {
          v = std::move(value);
          return;
        }
      entries.emplace_back(key, std::move(value));
    }
    void set(const std::string& key, double value) { set(key, format_double(value)); }
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }
    template<class I>
      requires std::is_integral_v<I>
    void set(const std::string& key, I value)
    {
      set(key, std::to_string(value));
    }

    std::optional<std::string> get(const std::string& key) const
    {
      for (const auto& [k, v] : entries)
        if (k == key)
          return v;
      return std::nullopt;
    }
  };

  struct Table
  {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add(const std::vector<double>& values)
    {
      std::vector<std::string> r;
      for (double v : values)
        r.push_back(format_double(v));
      rows.push_back(std::move(r));
    }
  };

  std::vector<Section> sections;
  std::vector<Table> tables;

  Section& section(const std::string& name)
  {
    for (auto& s : sections)
      if (s.name == name)
        return s;
    sections.push_back({ name, {} });
    return sections.back();
  }

  const Section* find_section(const std::string& name) const
  {
    for (const auto& s : sections)
      if (s.name == name)
        return &s;
    return nullptr;
  }

  Table& table(const std::string& name, std::vector<std::string> header)
  {
    tables.push_back({ name, std::move(header), {} });
    return tables.back();
  }

  const Table* find_table(const std::string& name) const
  {
    for (const auto& t : tables)
      if (t.name == name)
        return &t;
    return nullptr;
  }

  std::optional<std::string> get(const std::string& section, const std::string& key) const
  {
    const Section* s = find_section(section);
    return s ? s->get(key) : std::nullopt;
  }

  void write(std::ostream& os) const
  {
    bool first = true;
    for (const auto& s : sections) {
      if (!first)
        os << '\n';
      first = false;
      os << '[' << s.name << "]\n";
      for (const auto& [k, v] : s.entries)
        os << k << " = " << v << '\n';
    }
    for (const auto& t : tables) {
      if (!first)
        os << '\n';
      first = false;
      os << "[table:" << t.name << "]\n";
      std::ostringstream csv;
      write_csv_row(csv, t.header);
      for (const auto& r : t.rows)
        write_csv_row(csv, r);
      std::string body = csv.str();
      for (char c : body)
        if (c != '\r')
          os << c;
    }
  }

  std::string str() const
  {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  static Document parse(std::istream& is)
  {
    Document doc;
    std::string line;
    Section* sec = nullptr;
    Table* tab = nullptr;
    std::string table_text;
    auto flush = [&]() {
      if (!tab)
        return;
      std::istringstream in(table_text);
      auto rows = read_csv(in);
      if (!rows.empty()) {
        tab->header = rows.front();
        tab->rows.assign(rows.begin() + 1, rows.end());
      }
      table_text.clear();
      tab = nullptr;
    };
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      if (line.empty())
        continue;
      if (line.front() == '[' && line.back() == ']') {
        flush();
        const std::string name = line.substr(1, line.size() - 2);
        if (name.rfind("table:", 0) == 0) {
          doc.tables.push_back({ name.substr(6), {}, {} });
          tab = &doc.tables.back();
          sec = nullptr;
        } else {
          sec = &doc.section(name);
        }
        continue;
      }
      if (tab) {
        table_text += line + "\n";
      } else if (sec) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos)
          throw InputError("malformed document line " + std::to_string(lineno));
        sec->entries.emplace_back(line.substr(0, eq), line.substr(eq + 3));
      } else {
        throw InputError("document line " + std::to_string(lineno) +
                         " is outside any section");
      }
    }
    flush();
    return doc;
  }
};

// ---------------------------------------------------------------------------
// Dataset ingestion

// Column roles by header name. Empty covariates means every column not
// used by another role.
struct ColumnRoles
{
  std::string response = "y";
  std::string threshold = "x";
  std::vector<std::string> covariates;
  std::optional<std::string> weight;
};

//! "response=y,threshold=x,covariates=z1:z2,weight=w"; covariates=rest is the default.
inline ColumnRoles
parse_roles(const std::string& spec)
{
  ColumnRoles roles;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty())
      continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw InputError("column role '" + item + "' must look like role=column");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    if (val.empty())
      throw InputError("column role '" + key + "' has no column");
    if (key == "response")
      roles.response = val;
    else if (key == "threshold")
      roles.threshold = val;
    else if (key == "weight")
      roles.weight = val;
    else if (key == "covariates") {
      roles.covariates.clear();
      if (val != "rest") {
        std::stringstream cs(val);
        std::string c;
        while (std::getline(cs, c, ':'))
          if (!c.empty())
            roles.covariates.push_back(c);
      }
    } else {
      throw InputError("unknown column role '" + key + "'");
    }
  }
  return roles;
}

struct LoadedData
{
  Dataset data;
  //! Present when a weight column was named.
  std::optional<Vector> weights;
  std::vector<std::string> covariate_names;
  std::vector<std::string> notes;
};

inline LoadedData
load_csv(std::istream& is, const ColumnRoles& roles, char delim = ',')
{
  auto rows = read_csv(is, delim);
  if (rows.empty())
    throw InputError("CSV input is empty");
  const auto header = rows.front();
  if (rows.size() == 1)
    throw InputError("CSV input has a header but no data rows");

  auto column = [&](const std::string& name) -> std::size_t {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name)
        return j;
    throw InputError("column '" + name + "' not found in the CSV header");
  };
  const std::size_t ry = column(roles.response);
  const std::size_t rx = column(roles.threshold);
  std::optional<std::size_t> rw;
  if (roles.weight)
    rw = column(*roles.weight);
  std::vector<std::size_t> rz;
  std::vector<std::string> znames;
  if (roles.covariates.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (j != ry && j != rx && (!rw || j != *rw)) {
        rz.push_back(j);
        znames.push_back(header[j]);
      }
  } else {
    for (const auto& c : roles.covariates) {
      rz.push_back(column(c));
      znames.push_back(c);
    }
  }
  if (rz.empty())
    throw InputError("no covariate columns selected");

  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  Vector x(n), y(n), w(n);
  Matrix z(n, static_cast<Eigen::Index>(rz.size()));
  std::vector<std::size_t> bad;
  bool zero_coded = false;
  std::vector<std::size_t> bad_label;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i) + 1];
    bool ok = true;
    auto get = [&](std::size_t j) {
      if (j >= r.size()) {
        ok = false;
        return 0.0;
      }
      auto v = parse_double(r[j]);
      if (!v || !std::isfinite(*v)) {
        ok = false;
        return 0.0;
      }
      return *v;
    };
    const double yv = get(ry);
    x(i) = get(rx);
    for (std::size_t k = 0; k < rz.size(); ++k)
      z(i, static_cast<Eigen::Index>(k)) = get(rz[k]);
    if (rw)
      w(i) = get(*rw);
    if (!ok) {
      bad.push_back(static_cast<std::size_t>(i) + 1);
      continue;
    }
    if (yv == 0.0) {
      zero_coded = true;
      y(i) = -1.0;
    } else if (yv == 1.0 || yv == -1.0) {
      y(i) = yv;
    } else {
      bad_label.push_back(static_cast<std::size_t>(i) + 1);
    }
  }
  auto list = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size() && k < 50; ++k)
      s += (k ? ", " : "") + std::to_string(v[k]);
    if (v.size() > 50)
      s += ", ...";
    return s;
  };
  if (!bad.empty())
    throw InputError("missing or non-numeric values in data rows " + list(bad));
  if (!bad_label.empty())
    throw InputError("response must be coded -1/+1 or 0/1; bad values in data rows " +
                     list(bad_label));

  LoadedData out{ Dataset(std::move(x), std::move(y), std::move(z)), std::nullopt, znames, {} };
  if (zero_coded)
    out.notes.push_back("response coded 0/1; mapped 0 to -1");
  if (rw)
    out.weights = std::move(w);
  return out;
}

inline LoadedData
load_csv(const std::string& path, const ColumnRoles& roles, char delim = ',')
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw InputError("cannot open '" + path + "'");
  return load_csv(in, roles, delim);
}

//! Header y,x,z1..zd; values in shortest round-trip form.
inline void
write_dataset_csv(std::ostream& os, const Dataset& data, char delim = ',')
{
  std::vector<std::string> header{ "y", "x" };
  for (Eigen::Index j = 0; j < data.d(); ++j)
    header.push_back("z" + std::to_string(j + 1));
  write_csv_row(os, header, delim);
  std::vector<std::string> row(header.size());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    row[0] = format_double(data.y()(i));
    row[1] = format_double(data.x()(i));
    for (Eigen::Index j = 0; j < data.d(); ++j)
      row[static_cast<std::size_t>(j) + 2] = format_double(data.z()(i, j));
    write_csv_row(os, row, delim);
  }
}

} // namespace smooth_threshold
