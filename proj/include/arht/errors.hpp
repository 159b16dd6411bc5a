#pragma once

#include <stdexcept>
#include <string>

namespace arht {

// Base class for every recoverable failure the library reports.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define ARHT_DEFINE_ERROR(Name)                  \
    struct Name : Error {                        \
        using Error::Error;                      \
    }

// hdtest
ARHT_DEFINE_ERROR(DimensionMismatch);
ARHT_DEFINE_ERROR(DimensionError);
ARHT_DEFINE_ERROR(InsufficientSamples);
ARHT_DEFINE_ERROR(SingularCovariance);
ARHT_DEFINE_ERROR(NonPositiveLambda);
ARHT_DEFINE_ERROR(DegenerateCorrection);
ARHT_DEFINE_ERROR(AllCandidatesDegenerate);

// bnn
ARHT_DEFINE_ERROR(NonFiniteLoss);
ARHT_DEFINE_ERROR(CheckpointError);

// detector
ARHT_DEFINE_ERROR(EmptyDataset);
ARHT_DEFINE_ERROR(InsufficientTestSamples);
ARHT_DEFINE_ERROR(InvalidAlpha);
ARHT_DEFINE_ERROR(InvalidPValue);

// eval
ARHT_DEFINE_ERROR(DegenerateLabels);
ARHT_DEFINE_ERROR(NoPositives);

// data
ARHT_DEFINE_ERROR(BadMagic);
ARHT_DEFINE_ERROR(TruncatedFile);
ARHT_DEFINE_ERROR(DimensionOverflow);

#undef ARHT_DEFINE_ERROR

}  // namespace arht
