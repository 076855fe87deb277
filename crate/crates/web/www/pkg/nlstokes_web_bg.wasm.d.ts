/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_swirlsolve_free: (a: number, b: number) => void;
export const kernel_curves: (a: number, b: number, c: number) => [number, number, number, number];
export const profile_names: () => [number, number];
export const solve_swirl: (a: number, b: number, c: number, d: number) => [number, number, number];
export const swirlsolve_coords: (a: number) => [number, number];
export const swirlsolve_energy_gap: (a: number) => number;
export const swirlsolve_error_p: (a: number) => number;
export const swirlsolve_error_u: (a: number) => number;
export const swirlsolve_exact_u: (a: number) => [number, number];
export const swirlsolve_interior: (a: number) => [number, number];
export const swirlsolve_iterations: (a: number) => number;
export const swirlsolve_p: (a: number) => [number, number];
export const swirlsolve_residual: (a: number) => number;
export const swirlsolve_u: (a: number) => [number, number];
export const truncation_sweep: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_drop_slice: (a: number, b: number) => void;
export const __wbindgen_start: () => void;
