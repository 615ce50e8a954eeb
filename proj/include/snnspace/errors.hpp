/*
 * Copyright 2026 snnspace contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace snnspace {

/// Base class for every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor/layer dimensions do not line up.
struct ShapeError : Error {
    using Error::Error;
};

/// Invalid configuration value or inconsistent setup.
struct ConfigError : Error {
    using Error::Error;
};

/// Non-finite values or other numeric contract violations.
struct NumericError : Error {
    using Error::Error;
};

/// File or stream I/O failure, bad magic, checksum mismatch.
struct IoError : Error {
    using Error::Error;
};

/// Text input (config file, trace stream) could not be parsed.
struct ParseError : Error {
    using Error::Error;
};

/// Paired artifacts that must belong together do not (e.g. a gradient
/// tape replayed against parameters other than the ones that produced it).
struct IntegrityError : Error {
    using Error::Error;
};

} // namespace snnspace
