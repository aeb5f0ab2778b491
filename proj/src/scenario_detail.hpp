#pragma once

#include <map>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "tcs/expr.hpp"
#include "tcs/linalg.hpp"

namespace tcs {

struct Scenario;

namespace detail {

int line_of(const YAML::Node& n);
YAML::Node require(const YAML::Node& node, const std::string& key);
YAML::Node sequence(const YAML::Node& n);
std::string as_string(const YAML::Node& n);
double as_double(const YAML::Node& n, const std::map<std::string, double>& params);
int as_int(const YAML::Node& n);
bool as_bool(const YAML::Node& n);
std::vector<double> as_doubles(const YAML::Node& n, const std::map<std::string, double>& params);
std::vector<std::string> as_strings(const YAML::Node& n);
std::vector<Expr> compile_list(const YAML::Node& n, const std::vector<std::string>& vars,
                               const std::map<std::string, double>& params);
Vec eval(const std::vector<Expr>& exprs, const double* vars);

} // namespace detail

/// Resolves every reference of every experiment block in order.
void validate_experiments(const Scenario& sc);

} // namespace tcs
