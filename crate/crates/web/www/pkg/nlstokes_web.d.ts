/* tslint:disable */
/* eslint-disable */

export class SwirlSolve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Flat `x, y` pairs.
     */
    readonly coords: Float64Array;
    readonly energy_gap: number;
    readonly error_p: number;
    readonly error_u: number;
    readonly exact_u: Float64Array;
    /**
     * 1 for Interior points, 0 for the Layer.
     */
    readonly interior: Uint8Array;
    readonly iterations: number;
    readonly p: Float64Array;
    readonly residual: number;
    readonly u: Float64Array;
}

export function kernel_curves(name: string, samples: number): Float64Array;

export function profile_names(): string[];

/**
 * Solves the disk-swirl problem at horizon `delta` on a lattice of spacing `h`.
 */
export function solve_swirl(name: string, delta: number, h: number): SwirlSolve;

export function truncation_sweep(name: string, deltas: Float64Array, exponent: number, divisor: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_swirlsolve_free: (a: number, b: number) => void;
    readonly kernel_curves: (a: number, b: number, c: number) => [number, number, number, number];
    readonly profile_names: () => [number, number];
    readonly solve_swirl: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly swirlsolve_coords: (a: number) => [number, number];
    readonly swirlsolve_energy_gap: (a: number) => number;
    readonly swirlsolve_error_p: (a: number) => number;
    readonly swirlsolve_error_u: (a: number) => number;
    readonly swirlsolve_exact_u: (a: number) => [number, number];
    readonly swirlsolve_interior: (a: number) => [number, number];
    readonly swirlsolve_iterations: (a: number) => number;
    readonly swirlsolve_p: (a: number) => [number, number];
    readonly swirlsolve_residual: (a: number) => number;
    readonly swirlsolve_u: (a: number) => [number, number];
    readonly truncation_sweep: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_drop_slice: (a: number, b: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
