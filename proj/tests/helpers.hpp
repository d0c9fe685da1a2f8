#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "tmqa/chase.hpp"
#include "tmqa/homo.hpp"
#include "tmqa/model.hpp"
#include "tmqa/textio.hpp"

namespace tmqa_test {

inline std::string data_file(const std::string& name) {
  std::ifstream in(std::string(TMQA_TEST_DATA_DIR) + "/" + name);
  if (!in) throw std::runtime_error("missing test data file: " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline tmqa::RuleSet rules(const std::string& name) {
  return tmqa::textio::parse_rules(data_file(name));
}
inline tmqa::Instance instance(const std::string& name) {
  return tmqa::textio::parse_instance(data_file(name));
}
inline tmqa::ConjunctiveQuery query(const std::string& name) {
  return tmqa::textio::parse_query(data_file(name));
}

inline tmqa::Term C(const std::string& n) { return tmqa::Term::constant(n); }
inline tmqa::Term V(const std::string& n) { return tmqa::Term::variable(n); }
inline tmqa::Atom A(const std::string& rel, std::vector<tmqa::Term> args) {
  return tmqa::Atom{rel, std::move(args)};
}

}  // namespace tmqa_test
