// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace avsr::assets {

inline constexpr const char* kPhonemeFile = "phonemes_39.txt";
inline constexpr const char* kVisemeFile = "visemes_neti.txt";

extern const char* const kPhonemeAsset;
extern const char* const kVisemeAsset;
extern const char* const kManifest;

}  // namespace avsr::assets
