#pragma once

#include <stdexcept>
#include <string>

namespace traygrade {

// Base for every error this library throws. Subtypes exist so callers can
// catch a specific failure without string matching.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define TRAYGRADE_DEFINE_ERROR(NAME)                    \
    struct NAME : Error {                               \
        using Error::Error;                             \
        NAME() : Error(#NAME) {}                        \
    }

// raster
TRAYGRADE_DEFINE_ERROR(MalformedHeader);
TRAYGRADE_DEFINE_ERROR(TruncatedData);
TRAYGRADE_DEFINE_ERROR(UnsupportedMaxval);
TRAYGRADE_DEFINE_ERROR(WrongChannelCount);
TRAYGRADE_DEFINE_ERROR(EmptyMask);
TRAYGRADE_DEFINE_ERROR(DegenerateComponent);
TRAYGRADE_DEFINE_ERROR(SingularSystem);

// augment
TRAYGRADE_DEFINE_ERROR(BoxOutOfRange);
TRAYGRADE_DEFINE_ERROR(Unsupported);

// detect
TRAYGRADE_DEFINE_ERROR(MissingGroundTruth);
TRAYGRADE_DEFINE_ERROR(ShapeMismatch);
TRAYGRADE_DEFINE_ERROR(NegativeSize);
TRAYGRADE_DEFINE_ERROR(UnknownScene);

// align
TRAYGRADE_DEFINE_ERROR(DimensionMismatch);

// grade
TRAYGRADE_DEFINE_ERROR(BothViewsMissing);
TRAYGRADE_DEFINE_ERROR(UnknownClass);
TRAYGRADE_DEFINE_ERROR(MissingScale);

// eval
TRAYGRADE_DEFINE_ERROR(ClassOutOfRange);
TRAYGRADE_DEFINE_ERROR(EmptyMatrix);
TRAYGRADE_DEFINE_ERROR(EmptyDataset);

// dataset
TRAYGRADE_DEFINE_ERROR(BadTokenCount);
TRAYGRADE_DEFINE_ERROR(NonNumeric);
TRAYGRADE_DEFINE_ERROR(OutOfRange);
TRAYGRADE_DEFINE_ERROR(EmptyManifest);

// cli / pipeline
TRAYGRADE_DEFINE_ERROR(MissingPredictions);
TRAYGRADE_DEFINE_ERROR(IoError);
TRAYGRADE_DEFINE_ERROR(ConfigError);

#undef TRAYGRADE_DEFINE_ERROR

} // namespace traygrade
