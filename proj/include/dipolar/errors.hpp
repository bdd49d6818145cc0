#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace dipolar {

struct invalid_parameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// k landed exactly on a light circle |k+G| = kappa
struct divergence_error : std::runtime_error {
    Eigen::Vector2d image;
    divergence_error(const std::string& what, Eigen::Vector2d g)
        : std::runtime_error(what), image(std::move(g)) {}
};

struct degenerate_band_error : std::runtime_error {
    int band;
    Eigen::Vector2d k;
    double gap;
    degenerate_band_error(const std::string& what, int b, Eigen::Vector2d kk, double g)
        : std::runtime_error(what), band(b), k(std::move(kk)), gap(g) {}
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dipolar
