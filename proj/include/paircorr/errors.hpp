#pragma once

#include <stdexcept>
#include <string>

namespace paircorr {

// Violated model precondition: probabilities out of range, inconsistent
// marginals, empty accumulators, degenerate optimisation inputs, ...
class model_error : public std::domain_error {
public:
    explicit model_error(const std::string& what) : std::domain_error(what) {}
};

// The optimum of a 1-d search lies outside the supplied bracket.
class bracket_error : public model_error {
public:
    explicit bracket_error(const std::string& what) : model_error(what) {}
};

// Visibility (a-b)/(a+b) requested where a+b == 0.
class undefined_visibility_error : public model_error {
public:
    explicit undefined_visibility_error(const std::string& what) : model_error(what) {}
};

// File-format or filesystem failure.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace paircorr
