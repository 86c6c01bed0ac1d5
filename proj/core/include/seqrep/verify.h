// seqrep/verify.h

// Copyright 2026  seqrep authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SEQREP_VERIFY_H_
#define SEQREP_VERIFY_H_

// Self-verification suites: gradient checks of every loss, independent
// oracles (Monte Carlo KL, brute-force CTC, reference Adam) and exact
// identities between related objectives.

#include <cstdint>
#include <string>
#include <vector>

namespace seqrep {

struct VerifyCheck {
  std::string suite;
  std::string name;
  /// Measured discrepancy (or statistic) compared against `tolerance`.
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

std::vector<VerifyCheck> GradcheckSuite();
std::vector<VerifyCheck> OracleSuite();
std::vector<VerifyCheck> IdentitySuite();

/// Closed-form KL against Monte Carlo estimates for `n_gaussians` random
/// Gaussians with `samples` draws each.
std::vector<VerifyCheck> KlMonteCarloChecks(int n_gaussians, int64_t samples, uint64_t seed);
/// CTC forward-backward against path enumeration plus the completeness sum.
std::vector<VerifyCheck> CtcOracleChecks(int instances, uint64_t seed);

/// "gradcheck", "oracles", "identities" or "all".
std::vector<VerifyCheck> RunVerifySuite(const std::string &suite);

}  // namespace seqrep

#endif  // SEQREP_VERIFY_H_
