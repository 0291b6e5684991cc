/** JSON shapes returned by the analysis service. The UI renders these
 * verbatim; it never does inference of its own. */
export {};
