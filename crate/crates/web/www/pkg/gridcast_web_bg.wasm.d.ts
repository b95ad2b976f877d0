/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const edge_pairs: (a: number, b: number, c: number) => [number, number, number, number];
export const heatwaves: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const node_degrees: (a: number, b: number, c: number) => [number, number, number, number];
export const t2m_field: (a: number, b: number, c: number, d: bigint, e: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
