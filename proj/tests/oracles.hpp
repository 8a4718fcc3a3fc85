#pragma once

// Independent reference implementations used only by tests.

#include <span>
#include <string>
#include <vector>

#include "collapse/numcore.hpp"

namespace oracle {

// Exact optimum of the transportation LP min <P, C> s.t. P1 = a, P'1 = b,
// P >= 0, by enumerating every basic feasible solution (spanning trees of the
// bipartite support graph). Meant for n, m <= 4.
double transport_lp(const collapse::Matrix& cost, std::span<const double> a, std::span<const double> b);

// Exact OT between two uniform clouds of equal size via all permutations.
double permutation_ot(const collapse::Matrix& cost);

// Closed-form square root of a 2x2 symmetric PSD matrix.
collapse::Matrix sqrtm_2x2(const collapse::Matrix& m);

// Fréchet distance of two 2D Gaussians through the closed-form root.
double frechet_2d(std::span<const double> mu1, const collapse::Matrix& s1, std::span<const double> mu2,
                  const collapse::Matrix& s2);

// Returns an empty string for a well-formed XML document, else the problem.
std::string xml_problem(const std::string& doc);

// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

} // namespace oracle
