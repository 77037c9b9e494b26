/* tslint:disable */
/* eslint-disable */

/**
 * Result of a solve. Vectors are exposed as typed arrays.
 */
export class Solution {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    converged(): boolean;
    iterations(): number;
    m(): number;
    n(): number;
    phi0(): number;
    spacetime_pct(): number;
    spatial_pct(): number;
    /**
     * Control, time-major: entry `j * n + i` is time node `j`, vertex `i`.
     */
    u(): Float64Array;
    u_d(): Float64Array;
    /**
     * Spatial bound, one value per vertex.
     */
    w(): Float64Array;
}

/**
 * `[t, ψ_ε(t), t^{p/2}, ψ'_ε(t)]` interleaved for `samples` points in
 * `[0, t_max]`.
 */
export function psi_curve(p: number, eps: number, t_max: number, samples: number): Float64Array;

export function solve_1d(n: number, gamma: number, p: number): Solution;

export function solve_2d(n: number, gamma: number, p: number): Solution;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_solution_free: (a: number, b: number) => void;
    readonly psi_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly solution_converged: (a: number) => number;
    readonly solution_iterations: (a: number) => number;
    readonly solution_m: (a: number) => number;
    readonly solution_n: (a: number) => number;
    readonly solution_phi0: (a: number) => number;
    readonly solution_spacetime_pct: (a: number) => number;
    readonly solution_spatial_pct: (a: number) => number;
    readonly solution_u: (a: number) => [number, number];
    readonly solution_u_d: (a: number) => [number, number];
    readonly solution_w: (a: number) => [number, number];
    readonly solve_1d: (a: number, b: number, c: number) => [number, number, number];
    readonly solve_2d: (a: number, b: number, c: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
