#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nocs/error.hpp"

namespace nocs {

enum class Symmetry { None, FourFold, Continuous };

inline std::string to_string(Symmetry s) {
  switch (s) {
    case Symmetry::None: return "none";
    case Symmetry::FourFold: return "4-fold";
    case Symmetry::Continuous: return "continuous";
  }
  return "none";
}

inline Symmetry parse_symmetry(const std::string& s) {
  if (s == "none") return Symmetry::None;
  if (s == "4-fold") return Symmetry::FourFold;
  if (s == "continuous") return Symmetry::Continuous;
  fail(ErrorCode::SchemaViolation, "unknown symmetry tag '" + s + "'");
}

/// Category names with symmetry tags. Text format: one `name<TAB>symmetry`
/// per line, `#` starts a comment, symmetry defaults to none.
class Taxonomy {
 public:
  static Taxonomy parse(const std::string& text) {
    Taxonomy t;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.pop_back();
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      const std::string name = line.substr(0, tab);
      const Symmetry sym = tab == std::string::npos ? Symmetry::None : parse_symmetry(line.substr(tab + 1));
      if (name.empty()) fail(ErrorCode::SchemaViolation, "taxonomy line " + std::to_string(lineno) + ": empty name");
      if (!t.classes_.emplace(name, sym).second)
        fail(ErrorCode::SchemaViolation, "taxonomy line " + std::to_string(lineno) + ": duplicate '" + name + "'");
    }
    return t;
  }

  bool contains(const std::string& name) const { return classes_.count(name) != 0; }
  Symmetry symmetry(const std::string& name) const {
    const auto it = classes_.find(name);
    if (it == classes_.end()) fail(ErrorCode::SchemaViolation, "unknown category '" + name + "'");
    return it->second;
  }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, sym] : classes_) out.push_back(name);
    return out;
  }
  std::size_t size() const { return classes_.size(); }

 private:
  std::map<std::string, Symmetry> classes_;
};

inline constexpr const char* kBundledTaxonomy = R"(# name<TAB>symmetry
air conditioner
bag
bathtub
bed
bin
blanket
blinds
board
books
bookcase
bottle	continuous
bowl	continuous
box
cabinet
car
cart
chair
closet
clothes
coffee maker
computer
counter
cup	continuous
curtain
cyclist
desk
door
drawers
dresser
electronics
fan
faucet
fire extinguisher	continuous
fireplace
kitchen pan	continuous
keyboard
lamp
machine
microwave
mirror
monitor
night stand
oven
painting
pedestrian
pen	continuous
person
phone
picture
pillow
plates	continuous
potted plant	continuous
printer
projector
rack
refrigerator
shelves
sink
sofa
soundsystem
stationery
stove
table
television
tissues	4-fold
toaster
toilet
towel
toys
tram
tray
truck
utensils
van
vase	continuous
)";

inline const Taxonomy& bundled_taxonomy() {
  static const Taxonomy t = Taxonomy::parse(kBundledTaxonomy);
  return t;
}

inline Taxonomy load_taxonomy(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open taxonomy file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return Taxonomy::parse(ss.str());
}

}  // namespace nocs
