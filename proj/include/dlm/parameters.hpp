#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace dlm {

enum class Domain {
    nonnegative,   ///< standard deviations; estimated on the log scale
    unit_interval, ///< open interval (-1, 1); estimated on the atanh scale
    real,          ///< unconstrained
};

struct Parameter {
    std::string name;
    double value = 0.0;
    Domain domain = Domain::real;
    bool fixed = false;
};

/// Named structural parameters θ. Standard deviations are stored, not
/// variances; component blocks square them when building Q and R.
class ParameterVector {
public:
    ParameterVector() = default;

    ParameterVector& add(std::string name, double value, Domain domain, bool fixed = false) {
        if (contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
        entries_.push_back({std::move(name), value, domain, fixed});
        return *this;
    }

    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] const std::vector<Parameter>& entries() const { return entries_; }
    [[nodiscard]] const Parameter& entry(std::size_t i) const { return entries_.at(i); }

    [[nodiscard]] bool contains(const std::string& name) const { return find(name) != npos; }

    [[nodiscard]] std::size_t index(const std::string& name) const {
        auto i = find(name);
        if (i == npos) throw ConfigError("unknown parameter '" + name + "'");
        return i;
    }

    [[nodiscard]] double operator[](const std::string& name) const { return entries_[index(name)].value; }
    [[nodiscard]] double value(std::size_t i) const { return entries_.at(i).value; }

    void set(const std::string& name, double value) { entries_[index(name)].value = value; }
    void set_fixed(const std::string& name, bool fixed) { entries_[index(name)].fixed = fixed; }

    [[nodiscard]] std::vector<std::size_t> free_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (!entries_[i].fixed) out.push_back(i);
        return out;
    }

    [[nodiscard]] std::vector<std::string> free_names() const {
        std::vector<std::string> out;
        for (auto i : free_indices()) out.push_back(entries_[i].name);
        return out;
    }

    /// Throws DomainError naming the first entry outside its domain.
    void validate() const {
        for (const auto& p : entries_) {
            if (!in_domain(p.domain, p.value))
                throw DomainError("parameter '" + p.name + "' = " + std::to_string(p.value) +
                                  " is outside its domain");
        }
    }

    [[nodiscard]] bool valid() const {
        return std::all_of(entries_.begin(), entries_.end(),
                           [](const Parameter& p) { return in_domain(p.domain, p.value); });
    }

    static bool in_domain(Domain d, double v) {
        if (!std::isfinite(v)) return false;
        switch (d) {
            case Domain::nonnegative: return v >= 0.0;
            case Domain::unit_interval: return v > -1.0 && v < 1.0;
            case Domain::real: return true;
        }
        return false;
    }

    // Unconstrained coordinates for the free entries.

    static double to_unconstrained(Domain d, double v) {
        switch (d) {
            case Domain::nonnegative: return std::log(v);
            case Domain::unit_interval: return std::atanh(v);
            case Domain::real: return v;
        }
        return v;
    }

    static double from_unconstrained(Domain d, double z) {
        switch (d) {
            case Domain::nonnegative: return std::exp(z);
            case Domain::unit_interval: return std::tanh(z);
            case Domain::real: return z;
        }
        return z;
    }

    /// log |dθ/dz| of the inverse transform at z.
    static double log_jacobian(Domain d, double z) {
        switch (d) {
            case Domain::nonnegative: return z;
            case Domain::unit_interval: {
                double r = std::tanh(z);
                return std::log1p(-r * r);
            }
            case Domain::real: return 0.0;
        }
        return 0.0;
    }

    [[nodiscard]] Eigen::VectorXd free_unconstrained() const {
        auto idx = free_indices();
        Eigen::VectorXd z(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const auto& p = entries_[idx[j]];
            z(static_cast<Eigen::Index>(j)) = to_unconstrained(p.domain, p.value);
        }
        return z;
    }

    /// Copy with the free entries replaced from unconstrained coordinates z.
    [[nodiscard]] ParameterVector with_unconstrained(const Eigen::VectorXd& z) const {
        ParameterVector out = *this;
        auto idx = free_indices();
        if (static_cast<Eigen::Index>(idx.size()) != z.size())
            throw DimensionError("unconstrained vector size does not match free parameter count");
        for (std::size_t j = 0; j < idx.size(); ++j) {
            auto& p = out.entries_[idx[j]];
            p.value = from_unconstrained(p.domain, z(static_cast<Eigen::Index>(j)));
        }
        return out;
    }

    [[nodiscard]] double log_jacobian(const Eigen::VectorXd& z) const {
        auto idx = free_indices();
        double s = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j)
            s += log_jacobian(entries_[idx[j]].domain, z(static_cast<Eigen::Index>(j)));
        return s;
    }

    [[nodiscard]] Eigen::VectorXd free_values() const {
        auto idx = free_indices();
        Eigen::VectorXd v(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) v(static_cast<Eigen::Index>(j)) = entries_[idx[j]].value;
        return v;
    }

    [[nodiscard]] ParameterVector with_free_values(const Eigen::VectorXd& v) const {
        ParameterVector out = *this;
        auto idx = free_indices();
        if (static_cast<Eigen::Index>(idx.size()) != v.size())
            throw DimensionError("value vector size does not match free parameter count");
        for (std::size_t j = 0; j < idx.size(); ++j) out.entries_[idx[j]].value = v(static_cast<Eigen::Index>(j));
        return out;
    }

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    [[nodiscard]] std::size_t find(const std::string& name) const {
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (entries_[i].name == name) return i;
        return npos;
    }

    std::vector<Parameter> entries_;
};

}  // namespace dlm
