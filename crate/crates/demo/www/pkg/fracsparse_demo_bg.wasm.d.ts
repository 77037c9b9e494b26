/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_solution_free: (a: number, b: number) => void;
export const psi_curve: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const solution_converged: (a: number) => number;
export const solution_iterations: (a: number) => number;
export const solution_m: (a: number) => number;
export const solution_n: (a: number) => number;
export const solution_phi0: (a: number) => number;
export const solution_spacetime_pct: (a: number) => number;
export const solution_spatial_pct: (a: number) => number;
export const solution_u: (a: number) => [number, number];
export const solution_u_d: (a: number) => [number, number];
export const solution_w: (a: number) => [number, number];
export const solve_1d: (a: number, b: number, c: number) => [number, number, number];
export const solve_2d: (a: number, b: number, c: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
