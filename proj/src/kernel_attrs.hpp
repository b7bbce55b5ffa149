#pragma once

// Hot loops get an AVX2 clone picked at load time. FMA stays off so both
// clones round identically and results do not depend on the host CPU.
#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__) && !defined(EFILN_NO_CLONES)
#define EFILN_KERNEL __attribute__((target_clones("avx2", "default")))
#else
#define EFILN_KERNEL
#endif

#define EFILN_INLINE inline __attribute__((always_inline))
