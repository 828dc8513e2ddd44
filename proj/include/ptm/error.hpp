#pragma once

#include <stdexcept>
#include <string>

namespace ptm {

// Base class for every error raised by the library. Callers that only care
// about "something was wrong with the input" can catch this one.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parameter outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Power-series evaluation did not settle within the term cap.
class DivergedSeries : public Error {
public:
    using Error::Error;
};

// Operation defined only for Poisson / binomial / negative binomial laws.
class UnsupportedFamily : public Error {
public:
    using Error::Error;
};

// Restriction to a set of zero mass.
class NullRestriction : public Error {
public:
    using Error::Error;
};

class DisjointnessError : public Error {
public:
    using Error::Error;
};

class PartitionError : public Error {
public:
    using Error::Error;
};

// A closed-form expectation was requested but some mark kernel has no integrator.
class AnalyticUnavailable : public Error {
public:
    using Error::Error;
};

// Input violates a hypothesis of the functional-equation classifier.
class HypothesisViolation : public Error {
public:
    using Error::Error;
};

class StepSizeError : public Error {
public:
    using Error::Error;
};

// Trajectory too short to normalise the infection-time density.
class HorizonError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Experiment configuration rejected before dispatch. The message names the field.
class ValidationError : public Error {
public:
    using Error::Error;
};

}  // namespace ptm
